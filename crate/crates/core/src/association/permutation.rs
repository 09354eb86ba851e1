//! One-sided permutation test of the effect size and Bonferroni correction.
//!
//! Association scores are computed once; partitions only reshuffle them. The
//! statistic `mean(s_X) - mean(s_Y)` is strictly increasing in the X-group sum
//! when group sizes are fixed, so partitions are compared on that sum.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{association_scores, effect_size, PMethod};
use crate::aggregation::PooledEmbedding;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Hard ceiling on exhaustive enumeration when the caller forces it.
const FORCED_EXACT_LIMIT: u128 = 50_000_000;
const MC_BLOCK: u64 = 4096;
const MC_DOMAIN: u64 = 0x5045_524d; // "PERM"

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NhstMethod {
    /// Enumerate when `C(n_x + n_y, n_x) <= max_exact`, otherwise Monte-Carlo.
    #[default]
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub method: NhstMethod,
    pub max_exact: u64,
    pub mc_draws: u64,
    pub seed: u64,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            method: NhstMethod::Auto,
            max_exact: 200_000,
            mc_draws: 100_000,
            seed: 0,
        }
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

pub fn permutation_test(
    x: &[PooledEmbedding],
    y: &[PooledEmbedding],
    a: &[PooledEmbedding],
    b: &[PooledEmbedding],
    cfg: &PermutationConfig,
) -> Result<(f64, PMethod)> {
    let s_x = association_scores(x, a, b)?;
    let s_y = association_scores(y, a, b)?;
    permutation_test_scores(&s_x, &s_y, cfg)
}

/// Permutation p-value for the alternative `d > 0`, from fixed scores.
pub fn permutation_test_scores(
    s_x: &[f64],
    s_y: &[f64],
    cfg: &PermutationConfig,
) -> Result<(f64, PMethod)> {
    // same preconditions as the effect size itself
    effect_size(s_x, s_y)?;

    let scores: Vec<f64> = s_x.iter().chain(s_y).copied().collect();
    let n_x = s_x.len();
    let observed: f64 = s_x.iter().sum();
    // Partition sums that agree with the observed one up to rounding are ties.
    let tol = 1e-12 * scores.iter().map(|s| s.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let threshold = observed - tol;

    let partitions = binomial(scores.len() as u64, n_x as u64);
    let exact = match cfg.method {
        NhstMethod::Auto => partitions <= cfg.max_exact as u128,
        NhstMethod::Exact => {
            if partitions > FORCED_EXACT_LIMIT {
                return Err(Error::Config(format!(
                    "exact enumeration of {partitions} partitions is infeasible"
                )));
            }
            true
        }
        NhstMethod::MonteCarlo => false,
    };

    if exact {
        let hits = count_exact(&scores, n_x, threshold);
        Ok((hits as f64 / partitions as f64, PMethod::Exact))
    } else {
        if cfg.mc_draws == 0 {
            return Err(Error::Config("Monte-Carlo test needs at least one draw".into()));
        }
        let hits = count_monte_carlo(&scores, n_x, threshold, cfg.mc_draws, cfg.seed);
        Ok((
            (hits + 1) as f64 / (cfg.mc_draws + 1) as f64,
            PMethod::MonteCarlo,
        ))
    }
}

fn count_exact(scores: &[f64], n_x: usize, threshold: f64) -> u64 {
    fn walk(scores: &[f64], start: usize, left: usize, partial: f64, threshold: f64) -> u64 {
        if left == 0 {
            return u64::from(partial >= threshold);
        }
        let mut hits = 0;
        // keep enough elements after `i` to fill the remaining slots
        for i in start..=scores.len() - left {
            hits += walk(scores, i + 1, left - 1, partial + scores[i], threshold);
        }
        hits
    }
    walk(scores, 0, n_x, 0.0, threshold)
}

fn count_monte_carlo(scores: &[f64], n_x: usize, threshold: f64, draws: u64, seed: u64) -> u64 {
    let blocks = draws.div_ceil(MC_BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = stream_rng(seed, MC_DOMAIN, block);
            let mut idx: Vec<usize> = (0..scores.len()).collect();
            let len = MC_BLOCK.min(draws - block * MC_BLOCK);
            let mut hits = 0u64;
            for _ in 0..len {
                // partial Fisher-Yates: the first n_x slots form a uniform subset
                let mut sum = 0.0;
                for i in 0..n_x {
                    let j = rng.random_range(i..idx.len());
                    idx.swap(i, j);
                    sum += scores[idx[i]];
                }
                hits += u64::from(sum >= threshold);
            }
            hits
        })
        .sum()
}

pub fn bonferroni_threshold(alpha: f64, tests: usize) -> f64 {
    alpha / tests as f64
}

/// Reject decisions at family-wise level `alpha`.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if p_values.is_empty() {
        return Err(Error::Empty("p-value list"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    if let Some(p) = p_values.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::Config(format!("p-value {p} outside (0, 1]")));
    }
    let threshold = bonferroni_threshold(alpha, p_values.len());
    Ok(p_values.iter().map(|&p| p <= threshold).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED: ([f64; 2], [f64; 2]) = ([1.0, 0.2], [-1.0, -0.2]);

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(8, 4), 70);
        assert_eq!(binomial(52, 5), 2_598_960);
        assert_eq!(binomial(24, 12), 2_704_156);
        assert_eq!(binomial(5, 7), 0);
        assert_eq!(binomial(300, 150), u128::MAX);
    }

    #[test]
    fn worked_enumeration() {
        // statistics over the 6 partitions: 1.2, 0, 0.8, -0.8, 0, -1.2
        let (x, y) = WORKED;
        let (p, m) = permutation_test_scores(&x, &y, &PermutationConfig::default()).unwrap();
        assert_eq!(m, PMethod::Exact);
        assert_eq!(p, 1.0 / 6.0);
    }

    #[test]
    fn symmetric_null_counts_ties() {
        let s = [0.3, -0.1, 0.7];
        let (p, _) = permutation_test_scores(&s, &s, &PermutationConfig::default()).unwrap();
        assert!(p >= 0.5, "p = {p}");
    }

    #[test]
    fn monte_carlo_close_to_exact() {
        let (x, y) = WORKED;
        let cfg = PermutationConfig {
            method: NhstMethod::MonteCarlo,
            seed: 11,
            ..Default::default()
        };
        let (p, m) = permutation_test_scores(&x, &y, &cfg).unwrap();
        assert_eq!(m, PMethod::MonteCarlo);
        let exact = 1.0 / 6.0;
        let se = (exact * (1.0 - exact) / cfg.mc_draws as f64).sqrt();
        assert!((p - exact).abs() < 3.0 * se, "p = {p}");
        // reproducible bit for bit
        let (p2, _) = permutation_test_scores(&x, &y, &cfg).unwrap();
        assert_eq!(p.to_bits(), p2.to_bits());
    }

    #[test]
    fn auto_switches_to_monte_carlo() {
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = (0..12).map(|i| i as f64 * 0.1 - 0.35).collect();
        // C(24, 12) = 2,704,156 > 200,000
        let cfg = PermutationConfig {
            mc_draws: 2000,
            ..Default::default()
        };
        let (p, m) = permutation_test_scores(&x, &y, &cfg).unwrap();
        assert_eq!(m, PMethod::MonteCarlo);
        assert!(p >= 1.0 / 2001.0 && p <= 1.0);
        let forced = PermutationConfig {
            method: NhstMethod::Exact,
            ..cfg
        };
        assert_eq!(permutation_test_scores(&x, &y, &forced).unwrap().1, PMethod::Exact);
    }

    #[test]
    fn unequal_group_sizes() {
        let x = [0.9, 0.8, 0.7];
        let y = [0.1];
        // only the observed partition reaches the top sum among C(4,3) = 4
        let (p, _) = permutation_test_scores(&x, &y, &PermutationConfig::default()).unwrap();
        assert_eq!(p, 0.25);
    }

    #[test]
    fn bonferroni_cases() {
        assert_eq!(bonferroni(&[0.004, 0.2], 0.01).unwrap(), vec![true, false]);
        assert_eq!(bonferroni(&[0.01], 0.01).unwrap(), vec![true]);
        assert!(bonferroni(&[], 0.01).is_err());
        assert!(bonferroni(&[0.0], 0.01).is_err());
        assert!(bonferroni(&[0.5], 1.0).is_err());
        assert_eq!(bonferroni_threshold(0.01, 96), 0.01 / 96.0);
    }
}
