//! Synthetic embedding datasets with a known association direction, and
//! loop-based reference computations used to check the pipeline.
//!
//! Attribute poles sit on two orthogonal unit directions `a` and `b`. Targets
//! are Gaussian around `+delta * a` (X) and `-delta * a` (Y). Each stimulus's
//! base vector is copied into every (layer, frame) cell with a small jitter.

mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    write_manifest, write_tensor, Dataset, DatasetManifest, Role, StimulusRecord, StimulusTensor,
    VALENCE_KEY,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

pub use oracle::{oracle_speat_d, synthetic_spec, true_se};

const SYNTH_DOMAIN: u64 = 0x5359_4e54; // "SYNT"
const PAIR_DOMAIN: u64 = 0x5041_4952; // "PAIR"

pub const GROUP_X: &str = "group_x";
pub const GROUP_Y: &str = "group_y";
pub const GROUP_A: &str = "pleasant";
pub const GROUP_B: &str = "unpleasant";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScope {
    /// Only attribute stimuli get labels.
    Attributes,
    All,
}

/// Valence label `weights · base + bias`, computed on the noise-free base vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub scope: LabelScope,
}

impl LabelRule {
    /// Valence rises along the pleasant direction and falls along the unpleasant one.
    pub fn valence_axis(dim: usize, scope: LabelScope) -> Self {
        let mut weights = vec![0.0; dim];
        weights[0] = 1.0;
        if dim > 1 {
            weights[1] = -1.0;
        }
        LabelRule {
            weights,
            bias: 0.0,
            scope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dim: usize,
    pub layers: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub n_a: usize,
    pub n_b: usize,
    /// Offset of the target centroids along the pleasant direction.
    pub delta: f64,
    /// Standard deviation of target noise.
    pub noise: f64,
    /// Standard deviation of attribute noise around their unit centroids.
    pub attribute_noise: f64,
    /// Standard deviation of the per-cell jitter added when tiling.
    pub jitter: f64,
    pub paired: bool,
    /// Fraction of target noise variance shared within a matched pair.
    pub shared_noise: f64,
    pub label_rule: Option<LabelRule>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dim: 16,
            layers: 4,
            t_min: 3,
            t_max: 8,
            n_x: 60,
            n_y: 60,
            n_a: 20,
            n_b: 20,
            delta: 0.35,
            noise: 1.0,
            attribute_noise: 0.3,
            jitter: 0.1,
            paired: false,
            shared_noise: 0.5,
            label_rule: None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dim < 2 {
            return bad(format!("dim must be at least 2 for two attribute directions, got {}", self.dim));
        }
        if self.layers == 0 {
            return bad("layers must be at least 1".into());
        }
        if self.t_min == 0 || self.t_min > self.t_max {
            return bad(format!("bad timestep range {}..={}", self.t_min, self.t_max));
        }
        if [self.n_x, self.n_y, self.n_a, self.n_b].contains(&0) {
            return bad("every group needs at least one stimulus".into());
        }
        if self.paired && self.n_x != self.n_y {
            return bad(format!("paired design needs n_x == n_y, got {} and {}", self.n_x, self.n_y));
        }
        if !(0.0..=1.0).contains(&self.shared_noise) {
            return bad(format!("shared_noise must lie in [0, 1], got {}", self.shared_noise));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("noise", self.noise),
            ("attribute_noise", self.attribute_noise),
            ("jitter", self.jitter),
        ] {
            if !v.is_finite() || (name != "delta" && v < 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if let Some(rule) = &self.label_rule {
            if rule.weights.len() != self.dim {
                return bad(format!(
                    "label rule has {} weights for dim {}",
                    rule.weights.len(),
                    self.dim
                ));
            }
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn unit(dim: usize, axis: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[axis] = 1.0;
    v
}

struct Draft {
    record: StimulusRecord,
    tensor: StimulusTensor,
}

fn draft(
    cfg: &SynthConfig,
    role: Role,
    index: usize,
    stream: u64,
    shared: Option<&[f64]>,
) -> Result<Draft> {
    let mut rng = stream_rng(cfg.seed, SYNTH_DOMAIN, stream);
    let (group, prefix, centroid, sd) = match role {
        Role::TargetX => (GROUP_X, "x", scaled(&unit(cfg.dim, 0), cfg.delta), cfg.noise),
        Role::TargetY => (GROUP_Y, "y", scaled(&unit(cfg.dim, 0), -cfg.delta), cfg.noise),
        Role::AttributeA => (GROUP_A, "a", unit(cfg.dim, 0), cfg.attribute_noise),
        Role::AttributeB => (GROUP_B, "b", unit(cfg.dim, 1), cfg.attribute_noise),
    };
    let own = match shared {
        Some(_) => (1.0 - cfg.shared_noise).sqrt(),
        None => 1.0,
    };
    let base: Vec<f64> = (0..cfg.dim)
        .map(|d| {
            let common = shared.map_or(0.0, |c| cfg.shared_noise.sqrt() * c[d]);
            centroid[d] + sd * (own * gaussian(&mut rng) + common)
        })
        .collect();
    let steps = rng.random_range(cfg.t_min..=cfg.t_max);
    let tensor = StimulusTensor::from_fn(cfg.layers, steps, cfg.dim, |_, _, d| {
        (base[d] + cfg.jitter * gaussian(&mut rng)) as f32
    })?;

    let id = format!("{prefix}_{index:03}");
    let mut meta = BTreeMap::new();
    if let Some(rule) = &cfg.label_rule {
        if rule.scope == LabelScope::All || !role.is_target() {
            let v: f64 = rule.weights.iter().zip(&base).map(|(w, x)| w * x).sum::<f64>() + rule.bias;
            meta.insert(VALENCE_KEY.to_string(), v.to_string());
        }
    }
    let match_id = (cfg.paired && role.is_target()).then(|| format!("pair_{index:03}"));
    Ok(Draft {
        record: StimulusRecord {
            tensor_path: format!("tensors/{id}.npy"),
            id,
            role,
            group: group.to_string(),
            match_id,
            meta,
        },
        tensor,
    })
}

fn scaled(v: &[f64], k: f64) -> Vec<f64> {
    v.iter().map(|x| x * k).collect()
}

/// Build the dataset in memory; `base_dir` is left empty.
pub fn build(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.check()?;
    let mut drafts = Vec::new();
    let mut stream = 0u64;
    for (role, n) in [
        (Role::TargetX, cfg.n_x),
        (Role::TargetY, cfg.n_y),
        (Role::AttributeA, cfg.n_a),
        (Role::AttributeB, cfg.n_b),
    ] {
        for i in 0..n {
            let shared: Option<Vec<f64>> = (cfg.paired && role.is_target()).then(|| {
                let mut rng = stream_rng(cfg.seed, PAIR_DOMAIN, i as u64);
                (0..cfg.dim).map(|_| gaussian(&mut rng)).collect()
            });
            drafts.push(draft(cfg, role, i, stream, shared.as_deref())?);
            stream += 1;
        }
    }
    let (records, tensors): (Vec<_>, Vec<_>) =
        drafts.into_iter().map(|d| (d.record, d.tensor)).unzip();
    let manifest = DatasetManifest {
        model_id: format!("synthetic-seed{}", cfg.seed),
        layers: cfg.layers,
        dim: cfg.dim,
        records,
        base_dir: PathBuf::new(),
    };
    Dataset::from_parts(manifest, tensors)
}

/// Write the dataset under `out_dir`; returns the manifest path.
pub fn generate(cfg: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    let out_dir = out_dir.as_ref();
    let mut ds = build(cfg)?;
    let tensor_dir = out_dir.join("tensors");
    fs::create_dir_all(&tensor_dir).map_err(|e| Error::io(&tensor_dir, e))?;
    ds.manifest.base_dir = out_dir.to_path_buf();
    for (r, t) in ds.manifest.records.iter().zip(&ds.tensors) {
        write_tensor(ds.manifest.tensor_path(r), t)?;
    }
    let path = out_dir.join("manifest.json");
    write_manifest(&path, &ds.manifest)?;
    Ok(path)
}

/// Seed for trial `trial` of a Monte-Carlo experiment rooted at `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    derive_seed(seed, trial.wrapping_add(0x7472_6961_6c00_0000))
}
