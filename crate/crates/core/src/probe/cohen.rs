use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standardized mean difference between two prediction samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohenResult {
    pub d: f64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub pooled_sd: f64,
    pub n_x: usize,
    pub n_y: usize,
}

/// Cohen's d with the pooled standard deviation.
pub fn cohens_d(x: &[f64], y: &[f64]) -> Result<CohenResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::Config(format!(
            "cohens_d needs at least 2 values per group, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ss = |v: &[f64], m: f64| v.iter().map(|a| (a - m).powi(2)).sum::<f64>();
    let (mean_x, mean_y) = (mean(x), mean(y));
    let df = (x.len() + y.len() - 2) as f64;
    let pooled_sd = ((ss(x, mean_x) + ss(y, mean_y)) / df).sqrt();
    let scale = x.iter().chain(y).fold(0.0f64, |m, v| m.max(v.abs()));
    if !(pooled_sd > 8.0 * f64::EPSILON * scale) {
        return Err(Error::DegenerateVariance(
            "predictions have zero pooled standard deviation".into(),
        ));
    }
    Ok(CohenResult {
        d: (mean_x - mean_y) / pooled_sd,
        mean_x,
        mean_y,
        pooled_sd,
        n_x: x.len(),
        n_y: y.len(),
    })
}
