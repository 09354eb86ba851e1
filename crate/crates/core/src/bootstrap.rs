//! Bootstrap standard error of the effect size as a function of how many
//! target stimuli each group contributes.
//!
//! Attribute sets stay fixed; only targets are resampled, either stimulus by
//! stimulus within each group or as matched pairs. Association scores do not
//! depend on which other targets are drawn, so they are computed once and every
//! replicate works on resampled score vectors.

use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::effect_size;
use crate::audit::PreparedTest;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

const BOOT_DOMAIN: u64 = 0x424f_4f54; // "BOOT"

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleUnit {
    Individual,
    Pair,
}

impl FromStr for ResampleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "individual" => Ok(ResampleUnit::Individual),
            "pair" => Ok(ResampleUnit::Pair),
            _ => Err(Error::Config(format!("unknown resampling unit {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub unit: ResampleUnit,
    /// Extra draws allowed per size to replace degenerate replicates.
    pub max_redraws: usize,
}

impl BootstrapConfig {
    pub fn new(sizes: Vec<usize>, unit: ResampleUnit, seed: u64) -> Self {
        BootstrapConfig {
            sizes,
            replicates: 10_000,
            seed,
            unit,
            max_redraws: 10_000,
        }
    }

    fn check(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::Config("no bootstrap sizes given".into()));
        }
        if let Some(k) = self.sizes.iter().find(|&&k| k < 2) {
            return Err(Error::Config(format!("bootstrap size {k} is below 2")));
        }
        if self.replicates < 2 {
            return Err(Error::Config(
                "at least two replicates are needed for a standard error".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SePoint {
    pub k: usize,
    pub se: f64,
    pub replicates_used: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeCurve {
    pub points: Vec<SePoint>,
}

impl SeCurve {
    pub fn se_at(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|p| p.k == k).map(|p| p.se)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
        w.write_record(["k", "se", "replicates_used", "discarded"])
            .map_err(io)?;
        for p in &self.points {
            w.write_record([
                p.k.to_string(),
                p.se.to_string(),
                p.replicates_used.to_string(),
                p.discarded.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Sizes and pairing of the two target groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetGroups {
    pub n_x: usize,
    pub n_y: usize,
    pub pairs: Option<Vec<(usize, usize)>>,
}

/// Draw `k` units with replacement. Returns positions into the X and Y groups.
pub fn resample_targets<R: Rng + ?Sized>(
    groups: &TargetGroups,
    k: usize,
    unit: ResampleUnit,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    match unit {
        ResampleUnit::Pair => {
            let pairs = groups.pairs.as_ref().ok_or_else(|| {
                Error::Config("pair resampling needs matched targets (match_id)".into())
            })?;
            if pairs.is_empty() {
                return Err(Error::Empty("pair list"));
            }
            Ok((0..k)
                .map(|_| pairs[rng.random_range(0..pairs.len())])
                .unzip())
        }
        ResampleUnit::Individual => {
            if groups.n_x == 0 || groups.n_y == 0 {
                return Err(Error::Empty("target group"));
            }
            let xs = (0..k).map(|_| rng.random_range(0..groups.n_x)).collect();
            let ys = (0..k).map(|_| rng.random_range(0..groups.n_y)).collect();
            Ok((xs, ys))
        }
    }
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Bootstrap curve from precomputed association scores.
pub fn bootstrap_se_scores(
    s_x: &[f64],
    s_y: &[f64],
    pairs: Option<&[(usize, usize)]>,
    cfg: &BootstrapConfig,
) -> Result<SeCurve> {
    cfg.check()?;
    let groups = TargetGroups {
        n_x: s_x.len(),
        n_y: s_y.len(),
        pairs: pairs.map(<[_]>::to_vec),
    };
    if cfg.unit == ResampleUnit::Pair && groups.pairs.is_none() {
        return Err(Error::Config(
            "pair resampling needs matched targets (match_id)".into(),
        ));
    }

    let mut points = Vec::with_capacity(cfg.sizes.len());
    for &k in &cfg.sizes {
        let size_seed = derive_seed(cfg.seed, k as u64);
        // Candidate j depends only on (seed, k, j); candidates are consumed in
        // index order, so the curve is independent of thread count.
        let candidate = |j: u64| -> Result<Option<f64>> {
            let mut rng = stream_rng(size_seed, BOOT_DOMAIN, j);
            let (ix, iy) = resample_targets(&groups, k, cfg.unit, &mut rng)?;
            let rx: Vec<f64> = ix.iter().map(|&i| s_x[i]).collect();
            let ry: Vec<f64> = iy.iter().map(|&i| s_y[i]).collect();
            match effect_size(&rx, &ry) {
                Ok(d) => Ok(Some(d)),
                Err(Error::DegenerateVariance(_)) => Ok(None),
                Err(e) => Err(e),
            }
        };

        let budget = (cfg.replicates + cfg.max_redraws) as u64;
        let mut ds = Vec::with_capacity(cfg.replicates);
        let mut discarded = 0usize;
        let mut next = 0u64;
        while ds.len() < cfg.replicates && next < budget {
            let want = ((cfg.replicates - ds.len()) as u64).min(budget - next);
            let batch: Vec<Option<f64>> = (next..next + want)
                .into_par_iter()
                .map(candidate)
                .collect::<Result<_>>()?;
            next += want;
            for d in batch {
                match d {
                    Some(d) => ds.push(d),
                    None => discarded += 1,
                }
            }
        }
        if ds.len() < 2 {
            return Err(Error::DegenerateVariance(format!(
                "k = {k}: {} of {next} bootstrap replicates had zero joint variance",
                discarded
            )));
        }
        points.push(SePoint {
            k,
            se: sample_sd(&ds),
            replicates_used: ds.len(),
            discarded,
        });
    }
    Ok(SeCurve { points })
}

pub fn bootstrap_se(test: &PreparedTest, cfg: &BootstrapConfig) -> Result<SeCurve> {
    let (s_x, s_y) = test.scores()?;
    bootstrap_se_scores(&s_x, &s_y, test.pairs.as_deref(), cfg)
}
