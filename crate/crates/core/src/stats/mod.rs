//! Auxiliary two-sided tests used to check stimulus matching: Welch's t,
//! the paired t-test and simple least squares with a slope test.

mod special;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use special::{betainc, ln_gamma, t_cdf, t_two_sided};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

impl TestOutcome {
    fn new(statistic: f64, df: f64) -> Self {
        let p = t_two_sided(statistic, df).clamp(f64::MIN_POSITIVE, 1.0);
        TestOutcome {
            statistic,
            df,
            p_two_sided: p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_test: TestOutcome,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl OlsFit {
    /// `fitted,residual` rows for residual-vs-fitted plots.
    pub fn write_residuals_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
        w.write_record(["fitted", "residual"]).map_err(io)?;
        for (f, r) in self.fitted.iter().zip(&self.residuals) {
            w.write_record([f.to_string(), r.to_string()]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn need(xs: &[f64], n: usize, what: &'static str) -> Result<()> {
    if xs.len() < n {
        return Err(Error::Config(format!(
            "{what} needs at least {n} observations, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what}: non-finite observation")));
    }
    Ok(())
}

/// Welch's unequal-variances t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<TestOutcome> {
    need(x, 2, "welch_t")?;
    need(y, 2, "welch_t")?;
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    let (qx, qy) = (vx / x.len() as f64, vy / y.len() as f64);
    let se2 = qx + qy;
    if se2 <= 0.0 {
        return Err(Error::DegenerateVariance(
            "both samples have zero variance".into(),
        ));
    }
    let t = (mx - my) / se2.sqrt();
    let df = se2 * se2
        / (qx * qx / (x.len() - 1) as f64 + qy * qy / (y.len() - 1) as f64);
    Ok(TestOutcome::new(t, df))
}

/// One-sample t-test of paired differences against zero.
pub fn paired_t(diffs: &[f64]) -> Result<TestOutcome> {
    need(diffs, 2, "paired_t")?;
    let (mean, var) = mean_var(diffs);
    if var <= 0.0 {
        return Err(Error::DegenerateVariance(
            "paired differences have zero variance".into(),
        ));
    }
    let n = diffs.len() as f64;
    Ok(TestOutcome::new(mean / (var / n).sqrt(), n - 1.0))
}

/// Simple linear regression `y = intercept + slope * x` with a t-test on the slope.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "ols_fit: {} x values, {} y values",
            x.len(),
            y.len()
        )));
    }
    need(x, 3, "ols_fit")?;
    need(y, 3, "ols_fit")?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateVariance("x is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let fitted: Vec<f64> = x.iter().map(|v| intercept + slope * v).collect();
    let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if ssr <= n * (4.0 * f64::EPSILON * scale).powi(2) {
        return Err(Error::DegenerateVariance(
            "residual variance is zero; slope test undefined".into(),
        ));
    }
    let se_slope = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(OlsFit {
        slope,
        intercept,
        slope_test: TestOutcome::new(slope / se_slope, n - 2.0),
        fitted,
        residuals,
    })
}
