use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use psgb_core::harness::io::{
    read_box, read_instance, read_vector, write_instance, write_results, write_results_file,
    write_trace_file, write_vector,
};
use psgb_core::harness::{
    auto_reg_grid, auto_regularize, gen_e1, instance_from_signal, run_instance, run_suite,
    E1Params, InitialPoint, RunRecord, SuiteConfig, SuiteName,
};
use psgb_core::oracle::{brute_force_global_min, brute_force_prox, psi, so_point_check};
use psgb_core::{
    check_tau_stationary, make_least_squares, prox_sparse_group, BoxConstraint, DenseMatrix,
    GroupPartition, RegularizationParams, SmoothObjective, SolverConfig, TauPolicy,
};

#[derive(Parser)]
#[command(name = "psgb", version, about = "Sparse-group hard thresholding under box constraints")]
struct Cli {
    /// Worker threads for parallel runs (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random recovery instance file.
    Gen(GenArgs),
    /// Solve an instance file and print its results row.
    Solve(SolveArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
    /// Cross-check the solver and prox against brute-force oracles.
    Verify(VerifyArgs),
    /// Evaluate the proximal map of one vector.
    Prox(ProxArgs),
}

#[derive(Args, Clone)]
struct SolverFlags {
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    mu: f64,
    /// Explicit step size; overrides --tau-frac.
    #[arg(long)]
    tau: Option<f64>,
    /// Step size as a fraction of 1/L.
    #[arg(long, default_value_t = 0.99)]
    tau_frac: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    /// Stop once f(x) falls to this value.
    #[arg(long, allow_hyphen_values = true)]
    eps_target: Option<f64>,
    /// Pick lambda and mu from a grid by recovery error on a pilot instance.
    #[arg(long)]
    auto_reg: bool,
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            mu: self.mu,
            tau_policy: match self.tau {
                Some(tau) => TauPolicy::Explicit(tau),
                None => TauPolicy::FractionOfInverseL(self.tau_frac),
            },
            rel_change_tol: self.rel_tol,
            objective_target: self.eps_target.unwrap_or(f64::NEG_INFINITY),
            max_iterations: self.max_iter,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args)]
struct BoxFlags {
    /// Symmetric box magnitude, l = u = MAG.
    #[arg(long = "box", value_name = "MAG", conflicts_with = "box_file")]
    magnitude: Option<f64>,
    /// File with one `l u` pair per line.
    #[arg(long, value_name = "PATH")]
    box_file: Option<PathBuf>,
}

impl BoxFlags {
    fn resolve(&self, n: usize) -> Result<Option<BoxConstraint>> {
        if let Some(mag) = self.magnitude {
            return Ok(Some(BoxConstraint::symmetric(n, mag)?));
        }
        if let Some(path) = &self.box_file {
            let b = read_box(path)?;
            ensure!(b.dim() == n, "{} has {} bounds, expected {n}", path.display(), b.dim());
            return Ok(Some(b));
        }
        Ok(None)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Row count; defaults to round(m_ratio n).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.25)]
    m_ratio: f64,
    /// Nonzero count; defaults to round(s_ratio n).
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    s_ratio: f64,
    #[arg(long, default_value_t = 4)]
    w: usize,
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long = "box", default_value_t = 5.0)]
    magnitude: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Use this ground-truth vector instead of a random one.
    #[arg(long, value_name = "PATH")]
    signal: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file written by `gen`.
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    bounds: BoxFlags,
    #[arg(long, default_value = "zeros")]
    x0: InitialPoint,
    /// Overrides the seed stored in the instance (used by --x0 randn).
    #[arg(long)]
    seed: Option<u64>,
    /// Per-iteration CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final iterate here, one value per line.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Results CSV; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// dims, inits, boxes, group_sizes or sparsity.
    #[arg(long, default_value = "dims")]
    suite: SuiteName,
    #[command(flatten)]
    solver: SolverFlags,
    /// Comma-separated dimensions, replacing the suite's.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    m_ratio: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    s_ratios: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    #[arg(long = "box", value_delimiter = ',')]
    boxes: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<InitialPoint>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed; repetition r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ProxArgs {
    /// Vector file holding s.
    input: PathBuf,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Contiguous group width.
    #[arg(long, default_value_t = 1)]
    w: usize,
    #[command(flatten)]
    bounds: BoxFlags,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Solve(args) => solve(args),
        Command::Bench(args) => bench(args),
        Command::Verify(args) => verify(args),
        Command::Prox(args) => prox(args),
    }
}

fn gen(args: GenArgs) -> Result<()> {
    let inst = match &args.signal {
        Some(path) => {
            let x = read_vector(path)?;
            let m = args
                .m
                .unwrap_or_else(|| ((args.m_ratio * x.len() as f64).round() as usize).max(1));
            instance_from_signal(x, m, args.w, args.sigma, args.magnitude, args.seed)?
        }
        None => {
            let mut p = E1Params::from_ratios(args.n, args.m_ratio, args.s_ratio, args.w, args.sigma, args.magnitude);
            p.m = args.m.unwrap_or(p.m);
            p.sparsity = args.s.unwrap_or(p.sparsity);
            gen_e1(&p, args.seed)?
        }
    };
    write_instance(&inst, &args.output)?;
    eprintln!(
        "wrote {}: m = {}, n = {}, s = {}, w = {}",
        args.output.display(),
        inst.m(),
        inst.n(),
        inst.sparsity(),
        inst.group_width
    );
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let mut inst = read_instance(&args.instance)?;
    if let Some(b) = args.bounds.resolve(inst.n())? {
        inst.bounds = b;
    }
    if let Some(seed) = args.seed {
        inst.seed = seed;
    }
    let mut config = args.solver.config();
    if args.solver.auto_reg {
        // A stored instance has no generator to draw a pilot from, so it is
        // tuned against its own ground truth.
        let grid = auto_reg_grid();
        let (lambda, mu) = auto_regularize(&inst, &config, &args.x0, &grid, &grid)?;
        config.lambda = lambda;
        config.mu = mu;
    }
    config.record_trace = true;
    let outcome = run_instance(&inst, &config, &args.x0)?;
    for w in &outcome.trace.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.trace {
        write_trace_file(path, &outcome.trace.records)?;
    }
    if let Some(path) = &args.solution {
        write_vector(&outcome.trace.final_iterate, path)?;
    }
    emit(&[outcome.record], args.output.as_deref())
}

fn emit(records: &[RunRecord], output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => write_results_file(path, records)?,
        None => write_results(io::stdout().lock(), records)?,
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut config = SuiteConfig::defaults(args.suite);
    config.solver = args.solver.config();
    config.auto_reg = args.solver.auto_reg;
    if let Some(v) = args.dims {
        config.dims = v;
    }
    if let Some(v) = args.m_ratio {
        config.m_ratio = v;
    }
    if let Some(v) = args.s_ratios {
        config.s_ratios = v;
    }
    if let Some(v) = args.widths {
        config.widths = v;
    }
    if let Some(v) = args.boxes {
        config.boxes = v;
    }
    if let Some(v) = args.x0 {
        config.inits = v;
    }
    if let Some(v) = args.sigma {
        config.sigma = v;
    }
    if let Some(v) = args.reps {
        config.repetitions = v;
    }
    if let Some(v) = args.seed {
        config.base_seed = v;
    }
    let records = run_suite(&config, None)?;
    let failed = records.iter().filter(|r| !r.audit.passed()).count();
    if failed > 0 {
        eprintln!("warning: {failed} run(s) failed a convergence audit");
    }
    emit(&records, args.output.as_deref())
}

fn random_small_problem(
    rng: &mut ChaCha20Rng,
    n: usize,
) -> Result<(psgb_core::LeastSquaresObjective, BoxConstraint, GroupPartition, RegularizationParams)> {
    let m = n + 2;
    let data: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    let design = DenseMatrix::from_col_major(m, n, data).expect("sized above");
    let objective = make_least_squares(design, b)?;
    let pick = |rng: &mut ChaCha20Rng| match rng.random_range(0..4) {
        0 => 0.0,
        1 => f64::INFINITY,
        _ => rng.random_range(0.1..2.0),
    };
    let (lower, upper): (Vec<f64>, Vec<f64>) = (0..n).map(|_| (pick(rng), pick(rng))).unzip();
    let bounds = BoxConstraint::new(lower, upper)?;
    let mut groups = Vec::new();
    let mut start = 0;
    while start < n {
        let len = rng.random_range(1..=3).min(n - start);
        groups.push((start..start + len).collect());
        start += len;
    }
    let partition = GroupPartition::new(n, groups)?;
    let lambda = 10f64.powf(rng.random_range(-3.0..0.0));
    let mu = 10f64.powf(rng.random_range(-3.0..0.0));
    let tau = 0.99 / objective.smoothness();
    Ok((objective, bounds, partition, RegularizationParams::new(lambda, mu, tau)?))
}

fn verify(args: VerifyArgs) -> Result<()> {
    ensure!(args.n >= 1 && args.n <= 10, "--n must lie in 1..=10");
    let mut rng = ChaCha20Rng::seed_from_u64(args.seed);
    let mut prox_failures = 0;
    let mut chain_failures = 0;
    for _ in 0..args.count {
        let (objective, bounds, partition, params) = random_small_problem(&mut rng, args.n)?;

        let s: Vec<f64> = (0..args.n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x = prox_sparse_group(&s, &params, &bounds, &partition);
        let (_, best) = brute_force_prox(&s, &params, &bounds, &partition)?;
        if (psi(&x, &s, &params, &bounds, &partition) - best).abs() > 1e-10 {
            prox_failures += 1;
        }

        let (x_min, phi_min) = brute_force_global_min(&objective, &params, &bounds, &partition)?;
        let config = SolverConfig {
            lambda: params.lambda,
            mu: params.mu,
            rel_change_tol: 1e-12,
            max_iterations: 20_000,
            ..SolverConfig::default()
        };
        let trace = psgb_core::solve(&objective, &config, &bounds, &partition, &vec![0.0; args.n])?;
        let ok = so_point_check(&x_min, &objective, &bounds, 1e-6)
            && check_tau_stationary(&x_min, &objective, &params, &bounds, &partition, 1e-6)
            && trace.final_phi >= phi_min - 1e-9 * (1.0 + phi_min.abs());
        if !ok {
            chain_failures += 1;
        }
    }
    let mut out = io::stdout().lock();
    writeln!(out, "prox oracle: {} / {} agree", args.count - prox_failures, args.count)?;
    writeln!(out, "optimality chain: {} / {} hold", args.count - chain_failures, args.count)?;
    if prox_failures + chain_failures > 0 {
        bail!("verification failed");
    }
    Ok(())
}

fn prox(args: ProxArgs) -> Result<()> {
    let s = read_vector(&args.input)?;
    let n = s.len();
    let bounds = args.bounds.resolve(n)?.unwrap_or_else(|| BoxConstraint::unbounded(n));
    let partition = GroupPartition::contiguous(n, args.w)?;
    let params = RegularizationParams::new(args.lambda, args.mu, args.tau)?;
    let x = prox_sparse_group(&s, &params, &bounds, &partition);
    let mut out = io::stdout().lock();
    for v in x {
        writeln!(out, "{}", psgb_core::harness::io::format_float(v))?;
    }
    Ok(())
}
