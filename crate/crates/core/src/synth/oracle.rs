//! Reference computations written out with plain loops. They deliberately
//! share nothing with the pooling and association code they check.

use rayon::prelude::*;

use crate::aggregation::{AggregationConfig, LayerPool, LayerPosition, TemporalPool};
use crate::audit::EatSpec;
use crate::dataset::{Dataset, StimulusTensor};
use crate::error::{Error, Result};
use crate::synth::{build, trial_seed, SynthConfig, GROUP_A, GROUP_B, GROUP_X, GROUP_Y};

fn pick_layer(layers: usize, which: LayerPosition) -> usize {
    // 0-based
    let quarter = |num: usize| {
        let exact = (layers * num) as f64 / 4.0;
        let mut i = exact.floor() as usize;
        if exact - exact.floor() >= 0.5 {
            i += 1;
        }
        i.max(1).min(layers) - 1
    };
    match which {
        LayerPosition::First => 0,
        LayerPosition::Second => {
            if layers >= 2 {
                1
            } else {
                0
            }
        }
        LayerPosition::Q1 => quarter(1),
        LayerPosition::Q2 => quarter(2),
        LayerPosition::Q3 => quarter(3),
        LayerPosition::Penultimate => {
            if layers >= 2 {
                layers - 2
            } else {
                0
            }
        }
        LayerPosition::Last => layers - 1,
    }
}

fn pooled_vector(t: &StimulusTensor, agg: AggregationConfig) -> Vec<f64> {
    let (nl, nt, nd) = (t.layers(), t.timesteps(), t.dim());
    let mut per_layer = vec![vec![0.0f64; nd]; nl];
    for l in 0..nl {
        for d in 0..nd {
            let mut v = match agg.temporal {
                TemporalPool::Mean => 0.0,
                TemporalPool::Min => f64::INFINITY,
                TemporalPool::Max => f64::NEG_INFINITY,
            };
            for s in 0..nt {
                let x = t.get(l, s, d) as f64;
                v = match agg.temporal {
                    TemporalPool::Mean => v + x,
                    TemporalPool::Min => v.min(x),
                    TemporalPool::Max => v.max(x),
                };
            }
            if agg.temporal == TemporalPool::Mean {
                v /= nt as f64;
            }
            per_layer[l][d] = v;
        }
    }
    let mut out = vec![0.0f64; nd];
    for d in 0..nd {
        out[d] = match agg.layer {
            LayerPool::Sum => {
                let mut acc = 0.0;
                for row in &per_layer {
                    acc += row[d];
                }
                acc
            }
            LayerPool::Min => {
                let mut acc = f64::INFINITY;
                for row in &per_layer {
                    acc = acc.min(row[d]);
                }
                acc
            }
            LayerPool::Max => {
                let mut acc = f64::NEG_INFINITY;
                for row in &per_layer {
                    acc = acc.max(row[d]);
                }
                acc
            }
            LayerPool::Select(which) => per_layer[pick_layer(nl, which)][d],
        };
    }
    out
}

fn cos(u: &[f64], v: &[f64]) -> Result<f64> {
    let mut dot = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(dot / (uu.sqrt() * vv.sqrt()))
}

/// Effect size recomputed from scratch: pooling, cosines, means and the n−1
/// standard deviation, each as an explicit loop.
pub fn oracle_speat_d(ds: &Dataset, spec: &EatSpec) -> Result<f64> {
    let mut groups: [Vec<Vec<f64>>; 4] = Default::default();
    let labels = [&spec.x_label, &spec.y_label, &spec.a_label, &spec.b_label];
    for (r, t) in ds.manifest.records.iter().zip(&ds.tensors) {
        for g in 0..4 {
            if &r.group == labels[g] {
                groups[g].push(pooled_vector(t, spec.aggregation));
            }
        }
    }
    let [xs, ys, a_set, b_set] = &groups;
    if xs.is_empty() || ys.is_empty() || a_set.is_empty() || b_set.is_empty() {
        return Err(Error::Empty("group"));
    }

    let mut scores_x = Vec::new();
    let mut scores_y = Vec::new();
    for (targets, scores) in [(xs, &mut scores_x), (ys, &mut scores_y)] {
        for w in targets.iter() {
            let mut to_a = 0.0;
            for a in a_set {
                to_a += cos(w, a)?;
            }
            let mut to_b = 0.0;
            for b in b_set {
                to_b += cos(w, b)?;
            }
            scores.push(to_a / a_set.len() as f64 - to_b / b_set.len() as f64);
        }
    }

    let mut sum_x = 0.0;
    for s in &scores_x {
        sum_x += s;
    }
    let mut sum_y = 0.0;
    for s in &scores_y {
        sum_y += s;
    }
    let n = scores_x.len() + scores_y.len();
    if n < 3 {
        return Err(Error::Config("fewer than three target stimuli".into()));
    }
    let grand = (sum_x + sum_y) / n as f64;
    let mut sq = 0.0;
    let mut biggest = 0.0f64;
    for s in scores_x.iter().chain(&scores_y) {
        sq += (s - grand) * (s - grand);
        biggest = biggest.max(s.abs());
    }
    let sd = (sq / (n as f64 - 1.0)).sqrt();
    if sd <= f64::EPSILON * biggest || sd == 0.0 {
        return Err(Error::DegenerateVariance("oracle: zero joint SD".into()));
    }
    Ok((sum_x / scores_x.len() as f64 - sum_y / scores_y.len() as f64) / sd)
}

/// Test definition implied by the generator's group names.
pub fn synthetic_spec(aggregation: AggregationConfig) -> EatSpec {
    EatSpec {
        x_label: GROUP_X.into(),
        y_label: GROUP_Y.into(),
        a_label: GROUP_A.into(),
        b_label: GROUP_B.into(),
        aggregation,
    }
}

/// Monte-Carlo standard deviation of the effect size over fresh datasets with
/// `k` targets per group. Each trial redraws attributes too. Degenerate trials
/// are replaced, up to `trials` extra draws.
pub fn true_se(cfg: &SynthConfig, k: usize, trials: usize) -> Result<f64> {
    if trials < 2 {
        return Err(Error::Config(format!("true_se needs at least 2 trials, got {trials}")));
    }
    let spec = synthetic_spec(AggregationConfig::default());
    let one = |t: u64| -> Result<Option<f64>> {
        let trial = SynthConfig {
            n_x: k,
            n_y: k,
            seed: trial_seed(cfg.seed, t),
            ..cfg.clone()
        };
        match oracle_speat_d(&build(&trial)?, &spec) {
            Ok(d) => Ok(Some(d)),
            Err(Error::DegenerateVariance(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let budget = 2 * trials as u64;
    let mut ds = Vec::with_capacity(trials);
    let mut next = 0u64;
    while ds.len() < trials && next < budget {
        let want = ((trials - ds.len()) as u64).min(budget - next);
        let batch: Vec<Option<f64>> = (next..next + want).into_par_iter().map(one).collect::<Result<_>>()?;
        ds.extend(batch.into_iter().flatten());
        next += want;
    }
    if ds.len() < 2 {
        return Err(Error::DegenerateVariance(format!("k = {k}: every trial was degenerate")));
    }
    let n = ds.len() as f64;
    let mean = ds.iter().sum::<f64>() / n;
    Ok((ds.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}
