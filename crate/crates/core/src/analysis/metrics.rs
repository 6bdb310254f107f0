use crate::error::{Error, Result};

/// `‖θ̂ − θ*‖²₂`.
pub fn mse_to_optimal(theta_hat: &[f64], theta_star: &[f64]) -> Result<f64> {
    if theta_hat.len() != theta_star.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_star.len(),
            found: theta_hat.len(),
        });
    }
    Ok(theta_hat
        .iter()
        .zip(theta_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmsePoint {
    pub step: u64,
    /// `n · mean MSE`.
    pub value: f64,
    /// `n ·` standard error of the mean MSE.
    pub se: f64,
}

/// Scaled error curve `n · mean_seeds MSE_n` from per-seed `(n, MSE_n)`
/// series sampled on a common grid.
pub fn empirical_amse(series: &[Vec<(u64, f64)>]) -> Result<Vec<AmsePoint>> {
    let first = series.first().ok_or(Error::EmptySeries)?;
    if first.is_empty() {
        return Err(Error::EmptySeries);
    }
    for s in series {
        if s.len() != first.len() || s.iter().zip(first).any(|(a, b)| a.0 != b.0) {
            return Err(Error::ShapeMismatch(
                "series are not on a common step grid".into(),
            ));
        }
    }
    let runs = series.len() as f64;
    Ok((0..first.len())
        .map(|k| {
            let n = first[k].0;
            let mean = series.iter().map(|s| s[k].1).sum::<f64>() / runs;
            let se = if series.len() > 1 {
                let var =
                    series.iter().map(|s| (s[k].1 - mean).powi(2)).sum::<f64>() / (runs - 1.0);
                (var / runs).sqrt()
            } else {
                0.0
            };
            AmsePoint {
                step: n,
                value: n as f64 * mean,
                se: n as f64 * se,
            }
        })
        .collect())
}
