//! Binding an association test to a concrete dataset: resolving group labels,
//! pooling every stimulus and running the effect size with optional NHST.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{pool, AggregationConfig, PooledEmbedding};
use crate::association::{
    association_scores, effect_size, permutation_test_scores, AssociationScore, EatResult,
    PMethod, PermutationConfig,
};
use crate::dataset::{Dataset, DatasetManifest, Role};
use crate::error::{Error, Result};

/// Which groups play X, Y, A and B, and how their tensors are pooled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EatSpec {
    pub x_label: String,
    pub y_label: String,
    pub a_label: String,
    pub b_label: String,
    pub aggregation: AggregationConfig,
}

impl EatSpec {
    /// Use the single group label carried by each role.
    pub fn from_roles(m: &DatasetManifest, aggregation: AggregationConfig) -> Result<Self> {
        let label = |role: Role| -> Result<String> {
            let mut groups: Vec<&str> = m
                .records_with_role(role)
                .map(|(_, r)| r.group.as_str())
                .collect();
            groups.sort_unstable();
            groups.dedup();
            match groups.as_slice() {
                [one] => Ok(one.to_string()),
                [] => Err(Error::Config(format!("no records with role {role}"))),
                many => Err(Error::Config(format!(
                    "role {role} spans groups {many:?}; name the group explicitly"
                ))),
            }
        };
        Ok(EatSpec {
            x_label: label(Role::TargetX)?,
            y_label: label(Role::TargetY)?,
            a_label: label(Role::AttributeA)?,
            b_label: label(Role::AttributeB)?,
            aggregation,
        })
    }

    pub fn swapped_targets(&self) -> Self {
        EatSpec {
            x_label: self.y_label.clone(),
            y_label: self.x_label.clone(),
            ..self.clone()
        }
    }
}

/// Record indices selected for each concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

pub fn resolve(m: &DatasetManifest, spec: &EatSpec) -> Result<Selection> {
    let labels = [&spec.x_label, &spec.y_label, &spec.a_label, &spec.b_label];
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::Config(format!("group label {l:?} used for two concepts")));
        }
    }
    let pick = |label: &str, targets: bool| -> Result<Vec<usize>> {
        let idx: Vec<usize> = m
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.group == label)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return Err(Error::Config(format!("no records in group {label:?}")));
        }
        if let Some(&bad) = idx.iter().find(|&&i| m.records[i].role.is_target() != targets) {
            let kind = if targets { "target" } else { "attribute" };
            return Err(Error::Config(format!(
                "group {label:?} is used as a {kind} concept but record {:?} has role {}",
                m.records[bad].id, m.records[bad].role
            )));
        }
        Ok(idx)
    };
    Ok(Selection {
        x: pick(&spec.x_label, true)?,
        y: pick(&spec.y_label, true)?,
        a: pick(&spec.a_label, false)?,
        b: pick(&spec.b_label, false)?,
    })
}

/// Pooled embeddings for one test, ready for scoring and resampling.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    pub spec: EatSpec,
    pub ids_x: Vec<String>,
    pub ids_y: Vec<String>,
    pub x: Vec<PooledEmbedding>,
    pub y: Vec<PooledEmbedding>,
    pub a: Vec<PooledEmbedding>,
    pub b: Vec<PooledEmbedding>,
    /// `(x position, y position)` pairs when every selected target is matched.
    pub pairs: Option<Vec<(usize, usize)>>,
}

fn pool_all(ds: &Dataset, idx: &[usize], cfg: AggregationConfig) -> Result<Vec<PooledEmbedding>> {
    idx.par_iter()
        .map(|&i| PooledEmbedding::new(pool(&ds.tensors[i], cfg).into_inner()))
        .collect()
}

fn pair_up(m: &DatasetManifest, x: &[usize], y: &[usize]) -> Option<Vec<(usize, usize)>> {
    if x.len() != y.len() {
        return None;
    }
    let mut by_key: HashMap<&str, usize> = HashMap::with_capacity(y.len());
    for (j, &ri) in y.iter().enumerate() {
        if by_key.insert(m.records[ri].match_key()?, j).is_some() {
            return None;
        }
    }
    x.iter()
        .enumerate()
        .map(|(i, &ri)| by_key.remove(m.records[ri].match_key()?).map(|j| (i, j)))
        .collect()
}

impl PreparedTest {
    pub fn new(ds: &Dataset, spec: &EatSpec) -> Result<Self> {
        let sel = resolve(&ds.manifest, spec)?;
        let ids = |idx: &[usize]| -> Vec<String> {
            idx.iter().map(|&i| ds.manifest.records[i].id.clone()).collect()
        };
        Ok(PreparedTest {
            spec: spec.clone(),
            ids_x: ids(&sel.x),
            ids_y: ids(&sel.y),
            x: pool_all(ds, &sel.x, spec.aggregation)?,
            y: pool_all(ds, &sel.y, spec.aggregation)?,
            a: pool_all(ds, &sel.a, spec.aggregation)?,
            b: pool_all(ds, &sel.b, spec.aggregation)?,
            pairs: pair_up(&ds.manifest, &sel.x, &sel.y),
        })
    }

    pub fn scores(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((
            association_scores(&self.x, &self.a, &self.b)?,
            association_scores(&self.y, &self.a, &self.b)?,
        ))
    }

    /// Effect size, plus a permutation p-value when `nhst` is given.
    pub fn run(&self, nhst: Option<&PermutationConfig>) -> Result<EatResult> {
        let (s_x, s_y) = self.scores()?;
        let d = effect_size(&s_x, &s_y)?;
        let (p_value, p_method) = match nhst {
            Some(cfg) => {
                let (p, m) = permutation_test_scores(&s_x, &s_y, cfg)?;
                (Some(p), m)
            }
            None => (None, PMethod::None),
        };
        Ok(EatResult {
            d,
            n_x: s_x.len(),
            n_y: s_y.len(),
            s_x,
            s_y,
            p_value,
            p_method,
        })
    }

    /// Per-stimulus scores labelled with record ids, X first.
    pub fn labelled_scores(&self, result: &EatResult) -> Vec<AssociationScore> {
        self.ids_x
            .iter()
            .zip(&result.s_x)
            .chain(self.ids_y.iter().zip(&result.s_y))
            .map(|(id, &s)| AssociationScore {
                stimulus_id: id.clone(),
                s,
            })
            .collect()
    }
}
