//! On-disk formats.
//!
//! Instance file: the 6 magic bytes `PSGB1\n`, then little-endian `u64`
//! `m, n, w, seed`, then little-endian `f64` arrays in this order: the design
//! column-major (`m n` values), `b` (`m`), `x*` (`n`), `l` (`n`), `u` (`n`).
//!
//! Vector files are plain text: numbers separated by whitespace or commas.
//! Box files hold one `l u` pair per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::instance::ExperimentInstance;
use super::suite::RunRecord;
use super::HarnessError;
use crate::linalg::DenseMatrix;
use crate::model::{BoxConstraint, GroupPartition, IterateRecord};

pub const INSTANCE_MAGIC: &[u8; 6] = b"PSGB1\n";
const HEADER_LEN: usize = INSTANCE_MAGIC.len() + 4 * 8;

pub const RESULTS_HEADER: [&str; 19] = [
    "n",
    "m",
    "s",
    "w",
    "sigma",
    "seed",
    "lambda",
    "mu",
    "tau",
    "x0",
    "box",
    "iters",
    "time_s",
    "err",
    "psnr",
    "phi_final",
    "support_changes",
    "status",
    "success",
];

pub const TRACE_HEADER: [&str; 5] = ["k", "phi", "step_norm", "l0", "l20"];

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, what: impl Into<String>) -> HarnessError {
    HarnessError::Format {
        path: path.to_path_buf(),
        message: what.into(),
    }
}

pub fn encode_instance(inst: &ExperimentInstance) -> Vec<u8> {
    let (m, n) = (inst.m(), inst.n());
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (m * n + m + 3 * n));
    out.extend_from_slice(INSTANCE_MAGIC);
    for v in [m as u64, n as u64, inst.group_width as u64, inst.seed] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let arrays: [&[f64]; 5] = [
        inst.design.as_slice(),
        &inst.observation,
        &inst.ground_truth,
        inst.bounds.lower(),
        inst.bounds.upper(),
    ];
    for array in arrays {
        for v in array {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_instance(bytes: &[u8], path: &Path) -> Result<ExperimentInstance, HarnessError> {
    if bytes.len() < HEADER_LEN || &bytes[..INSTANCE_MAGIC.len()] != INSTANCE_MAGIC {
        return Err(format_err(path, "missing PSGB1 magic"));
    }
    let word = |i: usize| {
        let start = INSTANCE_MAGIC.len() + 8 * i;
        u64::from_le_bytes(bytes[start..start + 8].try_into().expect("8 bytes"))
    };
    let (m, n, w, seed) = (word(0) as usize, word(1) as usize, word(2) as usize, word(3));
    let floats = m
        .checked_mul(n)
        .and_then(|mn| mn.checked_add(m))
        .and_then(|v| v.checked_add(n.checked_mul(3)?))
        .ok_or_else(|| format_err(path, "header sizes overflow"))?;
    let expected = floats
        .checked_mul(8)
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| format_err(path, "header sizes overflow"))?;
    if bytes.len() != expected {
        return Err(format_err(
            path,
            format!("expected {expected} bytes for m = {m}, n = {n}, found {}", bytes.len()),
        ));
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut take = |k: usize| values.by_ref().take(k).collect::<Vec<f64>>();
    let design = DenseMatrix::from_col_major(m, n, take(m * n)).expect("length checked");
    let observation = take(m);
    let ground_truth = take(n);
    let lower = take(n);
    let upper = take(n);
    let bounds = BoxConstraint::new(lower, upper).map_err(|e| format_err(path, e.to_string()))?;
    let partition = GroupPartition::contiguous(n, w).map_err(|e| format_err(path, e.to_string()))?;
    Ok(ExperimentInstance {
        design,
        observation,
        ground_truth,
        sigma: None,
        group_width: w,
        bounds,
        partition,
        seed,
    })
}

pub fn write_instance(inst: &ExperimentInstance, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, encode_instance(inst)).map_err(|e| io_err(path, e))
}

pub fn read_instance(path: &Path) -> Result<ExperimentInstance, HarnessError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_instance(&bytes, path)
}

pub fn parse_vector(text: &str, path: &Path) -> Result<Vec<f64>, HarnessError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format_err(path, format!("not a number: {t:?}")))
        })
        .collect()
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_vector(&text, path)
}

pub fn write_vector(x: &[f64], path: &Path) -> Result<(), HarnessError> {
    let mut text = String::with_capacity(x.len() * 24);
    for v in x {
        text.push_str(&format_float(*v));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_box(path: &Path) -> Result<BoxConstraint, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let pair = parse_vector(line, path)?;
        let [l, u] = pair[..] else {
            return Err(format_err(path, format!("line {}: expected `l u`", line_no + 1)));
        };
        lower.push(l);
        upper.push(u);
    }
    BoxConstraint::new(lower, upper).map_err(|e| format_err(path, e.to_string()))
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, HarnessError> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(path, io),
        other => format_err(path, format!("{other:?}")),
    }
}

pub fn record_fields(r: &RunRecord) -> Vec<String> {
    vec![
        r.n.to_string(),
        r.m.to_string(),
        r.s.to_string(),
        r.w.to_string(),
        r.sigma.map_or_else(String::new, format_float),
        r.seed.to_string(),
        format_float(r.lambda),
        format_float(r.mu),
        format_float(r.tau),
        r.x0.clone(),
        r.box_label.clone(),
        r.iters.to_string(),
        format_float(r.time_s),
        format_float(r.err),
        format_float(r.psnr),
        format_float(r.phi_final),
        r.support_changes.to_string(),
        r.status.to_string(),
        r.success.to_string(),
    ]
}

/// Writes the header and one row per record.
pub fn write_results<W: Write>(out: W, records: &[RunRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.write_record(record_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_file(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    write_results(file, records).map_err(|e| csv_err(path, e))
}

pub fn write_trace_file(path: &Path, records: &[IterateRecord]) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    let wrap = |e| csv_err(path, e);
    w.write_record(TRACE_HEADER).map_err(wrap)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            format_float(r.phi),
            format_float(r.step_norm),
            r.l0.to_string(),
            r.l20.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::instance::{gen_e1, E1Params};

    fn params() -> E1Params {
        E1Params {
            n: 16,
            m: 5,
            group_width: 4,
            sparsity: 4,
            sigma: 0.01,
            box_magnitude: 5.0,
        }
    }

    #[test]
    fn instance_roundtrip_and_layout() {
        let inst = gen_e1(&params(), 9).unwrap();
        let bytes = encode_instance(&inst);
        assert_eq!(&bytes[..6], b"PSGB1\n");
        assert_eq!(u64::from_le_bytes(bytes[6..14].try_into().unwrap()), 5);
        assert_eq!(u64::from_le_bytes(bytes[14..22].try_into().unwrap()), 16);
        assert_eq!(u64::from_le_bytes(bytes[22..30].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[30..38].try_into().unwrap()), 9);
        assert_eq!(bytes.len(), 38 + 8 * (5 * 16 + 5 + 3 * 16));
        let first = f64::from_le_bytes(bytes[38..46].try_into().unwrap());
        assert_eq!(first, inst.design.get(0, 0));

        let back = decode_instance(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.design, inst.design);
        assert_eq!(back.observation, inst.observation);
        assert_eq!(back.ground_truth, inst.ground_truth);
        assert_eq!(back.bounds, inst.bounds);
        assert_eq!(back.sigma, None);
    }

    #[test]
    fn instance_validation() {
        let inst = gen_e1(&params(), 9).unwrap();
        let mut bytes = encode_instance(&inst);
        bytes.pop();
        assert!(matches!(
            decode_instance(&bytes, Path::new("x")),
            Err(HarnessError::Format { .. })
        ));
        let mut bad = encode_instance(&inst);
        bad[0] = b'Q';
        assert!(decode_instance(&bad, Path::new("x")).is_err());
        assert!(decode_instance(b"PSG", Path::new("x")).is_err());
    }

    #[test]
    fn vector_parsing() {
        let v = parse_vector("1.5, -2\n3e-1\tinf", Path::new("v")).unwrap();
        assert_eq!(v, vec![1.5, -2.0, 0.3, f64::INFINITY]);
        assert!(parse_vector("1 two", Path::new("v")).is_err());
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
