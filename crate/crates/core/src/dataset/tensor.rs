use std::path::Path;

use crate::dataset::npy;
use crate::error::{Error, Result};

/// Raw embeddings for one stimulus, laid out row-major as (layers, timesteps, dim).
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusTensor {
    layers: usize,
    timesteps: usize,
    dim: usize,
    values: Vec<f32>,
}

impl StimulusTensor {
    pub fn new(layers: usize, timesteps: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if layers == 0 || timesteps == 0 || dim == 0 {
            return Err(Error::ShapeMismatch(format!(
                "every axis must be non-empty, got ({layers}, {timesteps}, {dim})"
            )));
        }
        let expected = layers * timesteps * dim;
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "shape ({layers}, {timesteps}, {dim}) needs {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(StimulusTensor {
            layers,
            timesteps,
            dim,
            values,
        })
    }

    /// Build from a closure over `(layer, timestep, coordinate)`.
    pub fn from_fn(
        layers: usize,
        timesteps: usize,
        dim: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(layers * timesteps * dim);
        for l in 0..layers {
            for t in 0..timesteps {
                for d in 0..dim {
                    values.push(f(l, t, d));
                }
            }
        }
        Self::new(layers, timesteps, dim, values)
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.layers, self.timesteps, self.dim)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// The `T x D` block belonging to one layer.
    pub fn layer(&self, layer: usize) -> &[f32] {
        let stride = self.timesteps * self.dim;
        &self.values[layer * stride..(layer + 1) * stride]
    }

    pub fn frame(&self, layer: usize, timestep: usize) -> &[f32] {
        let start = (layer * self.timesteps + timestep) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn get(&self, layer: usize, timestep: usize, coord: usize) -> f32 {
        self.values[(layer * self.timesteps + timestep) * self.dim + coord]
    }
}

/// Load a `(L, T, D)` little-endian float32 NPY file.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<StimulusTensor> {
    let path = path.as_ref();
    let (shape, values) = npy::read_f32(path)?;
    if shape.len() != 3 {
        return Err(Error::MalformedTensor {
            path: path.to_path_buf(),
            reason: format!("expected a 3-axis array, header declares {shape:?}"),
        });
    }
    StimulusTensor::new(shape[0], shape[1], shape[2], values)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &StimulusTensor) -> Result<()> {
    // Values are validated at construction; nothing can be non-finite here.
    let (l, t, d) = tensor.shape();
    npy::write_f32(path.as_ref(), &[l, t, d], &tensor.values)
}
