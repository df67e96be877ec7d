use super::HarnessError;
use crate::linalg::{dist2, norm2};

/// Relative error `||x - x*|| / ||x*||`.
pub fn metric_err(x: &[f64], x_star: &[f64]) -> Result<f64, HarnessError> {
    check_len(x, x_star)?;
    let denom = norm2(x_star);
    if denom == 0.0 {
        return Err(HarnessError::Config("relative error undefined for a zero ground truth".into()));
    }
    Ok(dist2(x, x_star) / denom)
}

/// `-10 log10(||x - x*||^2 / n)`; `+inf` when `x == x*`.
pub fn metric_psnr(x: &[f64], x_star: &[f64]) -> Result<f64, HarnessError> {
    check_len(x, x_star)?;
    let sq: f64 = x.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum();
    if sq == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * (sq / x.len() as f64).log10())
}

fn check_len(x: &[f64], x_star: &[f64]) -> Result<(), HarnessError> {
    if x.len() != x_star.len() {
        return Err(HarnessError::Config(format!(
            "vector lengths differ: {} vs {}",
            x.len(),
            x_star.len()
        )));
    }
    Ok(())
}
