//! Collapsing a `(L, T, D)` stimulus tensor to one `D`-vector.
//!
//! Pooling runs in two stages: a temporal reduction inside every layer, then a
//! reduction (or single-layer selection) across layers. The default pipeline is
//! the per-layer mean followed by a sum over layers. All arithmetic accumulates
//! in `f64`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::StimulusTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TemporalPool {
    #[default]
    Mean,
    Min,
    Max,
}

/// A single layer picked by position within the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerPosition {
    First,
    Second,
    Q1,
    Q2,
    Q3,
    Penultimate,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LayerPool {
    #[default]
    Sum,
    Min,
    Max,
    Select(LayerPosition),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AggregationConfig {
    pub temporal: TemporalPool,
    pub layer: LayerPool,
}

impl TemporalPool {
    pub const ALL: [TemporalPool; 3] = [TemporalPool::Mean, TemporalPool::Min, TemporalPool::Max];

    fn name(self) -> &'static str {
        match self {
            TemporalPool::Mean => "mean",
            TemporalPool::Min => "min",
            TemporalPool::Max => "max",
        }
    }
}

impl LayerPosition {
    pub const ALL: [LayerPosition; 7] = [
        LayerPosition::First,
        LayerPosition::Second,
        LayerPosition::Q1,
        LayerPosition::Q2,
        LayerPosition::Q3,
        LayerPosition::Penultimate,
        LayerPosition::Last,
    ];

    fn name(self) -> &'static str {
        match self {
            LayerPosition::First => "first",
            LayerPosition::Second => "second",
            LayerPosition::Q1 => "q1",
            LayerPosition::Q2 => "q2",
            LayerPosition::Q3 => "q3",
            LayerPosition::Penultimate => "penultimate",
            LayerPosition::Last => "last",
        }
    }
}

impl LayerPool {
    pub const ALL: [LayerPool; 10] = [
        LayerPool::Sum,
        LayerPool::Min,
        LayerPool::Max,
        LayerPool::Select(LayerPosition::First),
        LayerPool::Select(LayerPosition::Second),
        LayerPool::Select(LayerPosition::Q1),
        LayerPool::Select(LayerPosition::Q2),
        LayerPool::Select(LayerPosition::Q3),
        LayerPool::Select(LayerPosition::Penultimate),
        LayerPool::Select(LayerPosition::Last),
    ];

    fn name(self) -> &'static str {
        match self {
            LayerPool::Sum => "sum",
            LayerPool::Min => "min",
            LayerPool::Max => "max",
            LayerPool::Select(p) => p.name(),
        }
    }
}

impl AggregationConfig {
    /// The full 3 x 10 temporal-by-layer grid.
    pub fn grid() -> impl Iterator<Item = AggregationConfig> {
        TemporalPool::ALL.into_iter().flat_map(|temporal| {
            LayerPool::ALL
                .into_iter()
                .map(move |layer| AggregationConfig { temporal, layer })
        })
    }
}

impl fmt::Display for AggregationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.temporal.name(), self.layer.name())
    }
}

impl FromStr for AggregationConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown aggregation {s:?}, expected <temporal>+<layer>"));
        let (t, l) = s.trim().split_once('+').ok_or_else(bad)?;
        let temporal = TemporalPool::ALL
            .into_iter()
            .find(|p| p.name() == t.to_ascii_lowercase())
            .ok_or_else(bad)?;
        let layer = LayerPool::ALL
            .into_iter()
            .find(|p| p.name() == l.to_ascii_lowercase())
            .ok_or_else(bad)?;
        Ok(AggregationConfig { temporal, layer })
    }
}

impl Serialize for AggregationConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AggregationConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One pooled `D`-vector, the unit compared by cosine similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledEmbedding(Vec<f64>);

impl PooledEmbedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("embedding"));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(PooledEmbedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for PooledEmbedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `L x D` matrix of per-layer vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMatrix {
    layers: usize,
    dim: usize,
    values: Vec<f64>,
}

impl LayerMatrix {
    pub fn new(layers: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if layers == 0 || dim == 0 || values.len() != layers * dim {
            return Err(Error::ShapeMismatch(format!(
                "layer matrix ({layers}, {dim}) with {} values",
                values.len()
            )));
        }
        Ok(LayerMatrix {
            layers,
            dim,
            values,
        })
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, layer: usize) -> &[f64] {
        &self.values[layer * self.dim..(layer + 1) * self.dim]
    }
}

/// 1-based index of the layer chosen by `position` in an `layers`-deep stack.
///
/// Quartile positions use `round(q * L)` with halves rounded away from zero,
/// so Q2 of a 48-layer model is layer 24. Results are clamped to `[1, L]`.
pub fn quartile_layer_index(layers: usize, position: LayerPosition) -> usize {
    let l = layers.max(1);
    let frac = |q: f64| (q * l as f64).round() as usize;
    let idx = match position {
        LayerPosition::First => 1,
        LayerPosition::Second => 2.min(l),
        LayerPosition::Q1 => frac(0.25),
        LayerPosition::Q2 => frac(0.5),
        LayerPosition::Q3 => frac(0.75),
        LayerPosition::Penultimate => l.saturating_sub(1).max(1),
        LayerPosition::Last => l,
    };
    idx.clamp(1, l)
}

pub fn pool_temporal(t: &StimulusTensor, mode: TemporalPool) -> LayerMatrix {
    let (layers, steps, dim) = t.shape();
    let mut out = Vec::with_capacity(layers * dim);
    for l in 0..layers {
        let block = t.layer(l);
        let mut acc: Vec<f64> = block[..dim].iter().map(|&v| v as f64).collect();
        for frame in block.chunks_exact(dim).skip(1) {
            for (a, &v) in acc.iter_mut().zip(frame) {
                let v = v as f64;
                match mode {
                    TemporalPool::Mean => *a += v,
                    TemporalPool::Min => *a = a.min(v),
                    TemporalPool::Max => *a = a.max(v),
                }
            }
        }
        if mode == TemporalPool::Mean {
            let n = steps as f64;
            acc.iter_mut().for_each(|a| *a /= n);
        }
        out.extend(acc);
    }
    LayerMatrix {
        layers,
        dim,
        values: out,
    }
}

pub fn pool_layers(m: &LayerMatrix, mode: LayerPool) -> PooledEmbedding {
    let values = match mode {
        LayerPool::Select(position) => m.row(quartile_layer_index(m.layers, position) - 1).to_vec(),
        _ => {
            let mut acc = m.row(0).to_vec();
            for l in 1..m.layers {
                for (a, &v) in acc.iter_mut().zip(m.row(l)) {
                    match mode {
                        LayerPool::Sum => *a += v,
                        LayerPool::Min => *a = a.min(v),
                        LayerPool::Max => *a = a.max(v),
                        LayerPool::Select(_) => unreachable!(),
                    }
                }
            }
            acc
        }
    };
    PooledEmbedding(values)
}

pub fn pool(t: &StimulusTensor, cfg: AggregationConfig) -> PooledEmbedding {
    pool_layers(&pool_temporal(t, cfg.temporal), cfg.layer)
}
