#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use speat_core::aggregation::PooledEmbedding;

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

pub fn random_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<PooledEmbedding> {
    (0..n)
        .map(|_| PooledEmbedding::new((0..dim).map(|_| gauss(rng)).collect()).unwrap())
        .collect()
}

/// Haar-ish random orthogonal matrix (rows), by Gram-Schmidt on Gaussian rows.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| gauss(rng)).collect();
        for _ in 0..2 {
            for r in &rows {
                let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi -= dot * ri;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            rows.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    rows
}

pub fn apply(q: &[Vec<f64>], v: &PooledEmbedding) -> PooledEmbedding {
    PooledEmbedding::new(
        q.iter()
            .map(|row| row.iter().zip(v.as_slice()).map(|(a, b)| a * b).sum())
            .collect(),
    )
    .unwrap()
}

/// Composite Simpson's rule on `[a, b]` with `panels` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Two-sided Student-t tail by numerical integration. With `t = sqrt(df) tan θ`
/// the density is proportional to `cos(θ)^(df - 1)` on `(-π/2, π/2)`, so the
/// normalizing constant is integrated too and no gamma function is needed.
/// Valid for `df >= 1`.
pub fn t_two_sided_quadrature(t: f64, df: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let kernel = |th: f64| th.cos().max(0.0).powf(df - 1.0);
    let theta = (t.abs() / df.sqrt()).atan();
    let panels = 40_000;
    let total = simpson(kernel, 0.0, half_pi, panels);
    let inner = simpson(kernel, 0.0, theta, panels);
    ((total - inner) / total).clamp(0.0, 1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
