//! Association scores, the embedding association effect size and the
//! significance machinery around it.

mod permutation;

use serde::{Deserialize, Serialize};

use crate::aggregation::PooledEmbedding;
use crate::error::{Error, Result};

pub use permutation::{
    binomial, bonferroni, bonferroni_threshold, permutation_test, permutation_test_scores,
    NhstMethod, PermutationConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    MonteCarlo,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationScore {
    pub stimulus_id: String,
    pub s: f64,
}

/// Effect size and per-stimulus scores for one X/Y vs A/B test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EatResult {
    pub d: f64,
    pub n_x: usize,
    pub n_y: usize,
    /// Association scores of the X stimuli, in input order.
    pub s_x: Vec<f64>,
    /// Association scores of the Y stimuli, in input order.
    pub s_y: Vec<f64>,
    pub p_value: Option<f64>,
    pub p_method: PMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CongruenceVerdict {
    pub speat_d: f64,
    pub iat_d: f64,
    pub congruent: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(u: &PooledEmbedding, v: &PooledEmbedding) -> Result<f64> {
    let (u, v) = (u.as_slice(), v.as_slice());
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "cosine of {}-dim and {}-dim vectors",
            u.len(),
            v.len()
        )));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn mean_cosine(w: &PooledEmbedding, set: &[PooledEmbedding]) -> Result<f64> {
    let mut total = 0.0;
    for v in set {
        total += cosine(w, v)?;
    }
    Ok(total / set.len() as f64)
}

/// Mean cosine of `w` to `a` minus its mean cosine to `b`.
pub fn association_s(w: &PooledEmbedding, a: &[PooledEmbedding], b: &[PooledEmbedding]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::Empty("attribute set A"));
    }
    if b.is_empty() {
        return Err(Error::Empty("attribute set B"));
    }
    Ok(mean_cosine(w, a)? - mean_cosine(w, b)?)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Effect size from precomputed association scores.
///
/// Numerator is the difference of group means; the denominator is the sample
/// standard deviation (n - 1) of the scores of both groups taken together.
pub fn effect_size(s_x: &[f64], s_y: &[f64]) -> Result<f64> {
    if s_x.is_empty() {
        return Err(Error::Empty("target set X"));
    }
    if s_y.is_empty() {
        return Err(Error::Empty("target set Y"));
    }
    let n = s_x.len() + s_y.len();
    if n < 3 {
        return Err(Error::Config(
            "effect size needs at least two stimuli in one target group".into(),
        ));
    }
    let joint_mean = (s_x.iter().sum::<f64>() + s_y.iter().sum::<f64>()) / n as f64;
    // per-group sums keep swapping X and Y an exact negation
    let ss_of = |g: &[f64]| g.iter().map(|s| (s - joint_mean).powi(2)).sum::<f64>();
    let ss = ss_of(s_x) + ss_of(s_y);
    let sd = (ss / (n - 1) as f64).sqrt();
    let scale = s_x
        .iter()
        .chain(s_y)
        .fold(0.0f64, |m, s| m.max(s.abs()));
    if !(sd > f64::EPSILON * scale) {
        return Err(Error::DegenerateVariance(format!(
            "joint standard deviation of {n} association scores is zero"
        )));
    }
    Ok((mean(s_x) - mean(s_y)) / sd)
}

pub fn association_scores(
    targets: &[PooledEmbedding],
    a: &[PooledEmbedding],
    b: &[PooledEmbedding],
) -> Result<Vec<f64>> {
    targets.iter().map(|w| association_s(w, a, b)).collect()
}

pub fn speat_d(
    x: &[PooledEmbedding],
    y: &[PooledEmbedding],
    a: &[PooledEmbedding],
    b: &[PooledEmbedding],
) -> Result<EatResult> {
    let s_x = association_scores(x, a, b)?;
    let s_y = association_scores(y, a, b)?;
    let d = effect_size(&s_x, &s_y)?;
    Ok(EatResult {
        d,
        n_x: s_x.len(),
        n_y: s_y.len(),
        s_x,
        s_y,
        p_value: None,
        p_method: PMethod::None,
    })
}

/// Strict sign agreement; zero agrees with nothing.
pub fn congruence(speat_d: f64, iat_d: f64) -> CongruenceVerdict {
    let congruent = (speat_d > 0.0 && iat_d > 0.0) || (speat_d < 0.0 && iat_d < 0.0);
    CongruenceVerdict {
        speat_d,
        iat_d,
        congruent,
    }
}
