//! The valence regression head: softmax-weighted layer average, a 256-wide
//! ReLU projection applied per frame, temporal mean, then a scalar readout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::StimulusTensor;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub const HIDDEN: usize = 256;
pub const ACTIVATION: &str = "relu";

const INIT_DOMAIN: u64 = 0x494e_4954; // "INIT"

/// Head parameters stored as one flat vector:
/// layer logits (L), W1 (D×H, row-major by input coordinate), b1 (H), W2 (H), b2 (1).
///
/// Gradients use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    layers: usize,
    dim: usize,
    hidden: usize,
    flat: Vec<f64>,
}

/// Offsets of each block inside the flat vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    len: usize,
}

fn layout(layers: usize, dim: usize, hidden: usize) -> Layout {
    let w1 = layers;
    let b1 = w1 + dim * hidden;
    let w2 = b1 + hidden;
    let b2 = w2 + hidden;
    Layout {
        w1,
        b1,
        w2,
        b2,
        len: b2 + 1,
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub layer_weights: Vec<f64>,
    /// Layer-averaged frames, T×D.
    pub mixed: Vec<f64>,
    /// Pre-activations of the hidden projection, T×H.
    pub pre_activation: Vec<f64>,
    /// Temporal mean of the activations, H.
    pub pooled: Vec<f64>,
    pub output: f64,
}

impl HeadParams {
    pub fn zeros(layers: usize, dim: usize) -> Self {
        Self::zeros_with_hidden(layers, dim, HIDDEN)
    }

    pub(crate) fn zeros_with_hidden(layers: usize, dim: usize, hidden: usize) -> Self {
        HeadParams {
            layers,
            dim,
            hidden,
            flat: vec![0.0; layout(layers, dim, hidden).len],
        }
    }

    /// Zero logits and biases, Xavier-uniform projections drawn from `seed`.
    pub fn init(layers: usize, dim: usize, seed: u64) -> Self {
        let mut p = Self::zeros(layers, dim);
        let mut rng = stream_rng(seed, INIT_DOMAIN, 0);
        let lim1 = (6.0 / (dim + p.hidden) as f64).sqrt();
        for w in p.w1_mut() {
            *w = rng.random_range(-lim1..lim1);
        }
        let lim2 = (6.0 / (p.hidden + 1) as f64).sqrt();
        for w in p.w2_mut() {
            *w = rng.random_range(-lim2..lim2);
        }
        p
    }

    pub fn from_flat(layers: usize, dim: usize, hidden: usize, flat: Vec<f64>) -> Result<Self> {
        let want = layout(layers, dim, hidden).len;
        if layers == 0 || dim == 0 || hidden == 0 || flat.len() != want {
            return Err(Error::ShapeMismatch(format!(
                "head (L={layers}, D={dim}, H={hidden}) needs {want} parameters, got {}",
                flat.len()
            )));
        }
        if let Some(index) = flat.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(HeadParams {
            layers,
            dim,
            hidden,
            flat,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros_with_hidden(self.layers, self.dim, self.hidden)
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.flat
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    fn layout(&self) -> Layout {
        layout(self.layers, self.dim, self.hidden)
    }

    pub fn layer_logits(&self) -> &[f64] {
        &self.flat[..self.layers]
    }

    pub fn layer_logits_mut(&mut self) -> &mut [f64] {
        &mut self.flat[..self.layers]
    }

    /// `w1()[d * H + h]` connects input coordinate `d` to hidden unit `h`.
    pub fn w1(&self) -> &[f64] {
        let o = self.layout();
        &self.flat[o.w1..o.b1]
    }

    pub fn w1_mut(&mut self) -> &mut [f64] {
        let o = self.layout();
        &mut self.flat[o.w1..o.b1]
    }

    pub fn b1(&self) -> &[f64] {
        let o = self.layout();
        &self.flat[o.b1..o.w2]
    }

    pub fn b1_mut(&mut self) -> &mut [f64] {
        let o = self.layout();
        &mut self.flat[o.b1..o.w2]
    }

    pub fn w2(&self) -> &[f64] {
        let o = self.layout();
        &self.flat[o.w2..o.b2]
    }

    pub fn w2_mut(&mut self) -> &mut [f64] {
        let o = self.layout();
        &mut self.flat[o.w2..o.b2]
    }

    pub fn b2(&self) -> f64 {
        self.flat[self.layout().b2]
    }

    pub fn set_b2(&mut self, v: f64) {
        let i = self.layout().b2;
        self.flat[i] = v;
    }

    /// Named parameter blocks as `(name, flat range)`.
    pub fn blocks(&self) -> [(&'static str, std::ops::Range<usize>); 5] {
        let o = self.layout();
        [
            ("layer_logits", 0..o.w1),
            ("w1", o.w1..o.b1),
            ("b1", o.b1..o.w2),
            ("w2", o.w2..o.b2),
            ("b2", o.b2..o.len),
        ]
    }

    /// Softmax of the layer logits.
    pub fn layer_weights(&self) -> Vec<f64> {
        let logits = self.layer_logits();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|v| v / total).collect()
    }

    fn check_input(&self, t: &StimulusTensor) -> Result<()> {
        if t.layers() != self.layers || t.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "head expects (L={}, ·, D={}), tensor is {:?}",
                self.layers,
                self.dim,
                t.shape()
            )));
        }
        Ok(())
    }

    pub fn forward_trace(&self, t: &StimulusTensor) -> Result<ForwardTrace> {
        self.check_input(t)?;
        let (nl, nt, nd, nh) = (self.layers, t.timesteps(), self.dim, self.hidden);
        let weights = self.layer_weights();

        let mut mixed = vec![0.0; nt * nd];
        for (l, &w) in weights.iter().enumerate() {
            for (m, &x) in mixed.iter_mut().zip(t.layer(l)) {
                *m += w * x as f64;
            }
        }
        debug_assert_eq!(nl, weights.len());

        let (w1, b1, w2) = (self.w1(), self.b1(), self.w2());
        let mut pre = vec![0.0; nt * nh];
        let mut pooled = vec![0.0; nh];
        for ti in 0..nt {
            let z = &mut pre[ti * nh..(ti + 1) * nh];
            z.copy_from_slice(b1);
            for (d, &m) in mixed[ti * nd..(ti + 1) * nd].iter().enumerate() {
                for (zh, &w) in z.iter_mut().zip(&w1[d * nh..(d + 1) * nh]) {
                    *zh += m * w;
                }
            }
            for (p, &zh) in pooled.iter_mut().zip(z.iter()) {
                *p += zh.max(0.0);
            }
        }
        for p in &mut pooled {
            *p /= nt as f64;
        }
        let output = pooled.iter().zip(w2).map(|(v, w)| v * w).sum::<f64>() + self.b2();
        Ok(ForwardTrace {
            layer_weights: weights,
            mixed,
            pre_activation: pre,
            pooled,
            output,
        })
    }

    pub fn forward(&self, t: &StimulusTensor) -> Result<f64> {
        Ok(self.forward_trace(t)?.output)
    }

    /// Mean squared error over the batch and its exact gradient.
    pub fn backward(&self, batch: &[(&StimulusTensor, f64)]) -> Result<(f64, HeadParams)> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        let (nl, nd, nh) = (self.layers, self.dim, self.hidden);
        let o = self.layout();
        let mut grad = self.zeros_like();
        let mut loss = 0.0;
        let n = batch.len() as f64;
        let w1 = self.w1();
        let w2 = self.w2();

        let mut d_weights = vec![0.0; nl];
        for &(t, target) in batch {
            let tr = self.forward_trace(t)?;
            let nt = t.timesteps();
            let err = tr.output - target;
            loss += err * err / n;
            let g_out = 2.0 * err / n;

            let g = &mut grad.flat;
            g[o.b2] += g_out;
            for (gw, v) in g[o.w2..o.b2].iter_mut().zip(&tr.pooled) {
                *gw += g_out * v;
            }
            // d(loss)/d(pre-activation) per frame is g_out * w2 / T on active units.
            let scale = g_out / nt as f64;
            let mut dz = vec![0.0; nh];
            d_weights.iter_mut().for_each(|v| *v = 0.0);
            for ti in 0..nt {
                let z = &tr.pre_activation[ti * nh..(ti + 1) * nh];
                for ((dzh, &zh), &w) in dz.iter_mut().zip(z).zip(w2) {
                    *dzh = if zh > 0.0 { scale * w } else { 0.0 };
                }
                for (gb, &dzh) in g[o.b1..o.w2].iter_mut().zip(&dz) {
                    *gb += dzh;
                }
                let m = &tr.mixed[ti * nd..(ti + 1) * nd];
                let mut dm = vec![0.0; nd];
                for d in 0..nd {
                    let row = d * nh;
                    let gw = &mut g[o.w1 + row..o.w1 + row + nh];
                    let wrow = &w1[row..row + nh];
                    let mut acc = 0.0;
                    for h in 0..nh {
                        gw[h] += m[d] * dz[h];
                        acc += wrow[h] * dz[h];
                    }
                    dm[d] = acc;
                }
                for (l, dw) in d_weights.iter_mut().enumerate() {
                    let frame = t.frame(l, ti);
                    *dw += frame.iter().zip(&dm).map(|(&x, g)| x as f64 * g).sum::<f64>();
                }
            }
            // Softmax Jacobian: dz_l = w_l (dw_l - Σ_k w_k dw_k).
            let dot: f64 = tr.layer_weights.iter().zip(&d_weights).map(|(w, d)| w * d).sum();
            for (l, gl) in g[..o.w1].iter_mut().enumerate() {
                *gl += tr.layer_weights[l] * (d_weights[l] - dot);
            }
        }
        Ok((loss, grad))
    }
}
