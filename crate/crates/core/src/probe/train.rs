use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, StimulusTensor};
use crate::error::{Error, Result};
use crate::probe::adam::{adam_step, AdamConfig, AdamState};
use crate::probe::head::HeadParams;
use crate::rng::stream_rng;

const SHUFFLE_DOMAIN: u64 = 0x5348_5546; // "SHUF"

pub const DEFAULT_LEARNING_RATES: [f64; 3] = [1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(learning_rate: f64, seed: u64) -> Self {
        TrainConfig {
            learning_rate,
            max_steps: 20_000,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Labeled training examples taken from a dataset.
///
/// With `groups = None` every record carrying a valence label is used. Naming
/// groups requires every record in them to be labeled.
pub fn training_examples<'a>(
    ds: &'a Dataset,
    groups: Option<&[String]>,
) -> Result<Vec<(&'a StimulusTensor, f64)>> {
    let mut out = Vec::new();
    for (r, t) in ds.manifest.records.iter().zip(&ds.tensors) {
        let wanted = groups.is_none_or(|g| g.contains(&r.group));
        if !wanted {
            continue;
        }
        match r.valence() {
            Some(v) => out.push((t, v?)),
            None if groups.is_some() => return Err(Error::MissingLabel(r.id.clone())),
            None => {}
        }
    }
    if out.is_empty() {
        return Err(Error::MissingLabel(match groups {
            Some(g) => format!("(groups {g:?})"),
            None => "(any record)".into(),
        }));
    }
    Ok(out)
}

/// Stepwise Adam training over shuffled mini-batches.
pub struct Trainer<'a> {
    examples: &'a [(&'a StimulusTensor, f64)],
    cfg: TrainConfig,
    params: HeadParams,
    state: AdamState,
    order: Vec<usize>,
    cursor: usize,
    epoch: u64,
    losses: Vec<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(examples: &'a [(&'a StimulusTensor, f64)], cfg: TrainConfig) -> Result<Self> {
        cfg.check()?;
        let (first, _) = examples.first().ok_or(Error::Empty("training set"))?;
        let params = HeadParams::init(first.layers(), first.dim(), cfg.seed);
        Self::with_params(examples, cfg, params)
    }

    pub fn with_params(
        examples: &'a [(&'a StimulusTensor, f64)],
        cfg: TrainConfig,
        params: HeadParams,
    ) -> Result<Self> {
        cfg.check()?;
        if examples.is_empty() {
            return Err(Error::Empty("training set"));
        }
        if let Some((t, _)) = examples
            .iter()
            .find(|(t, _)| t.layers() != params.layers() || t.dim() != params.dim())
        {
            return Err(Error::ShapeMismatch(format!(
                "training tensor {:?} does not fit a head with L={}, D={}",
                t.shape(),
                params.layers(),
                params.dim()
            )));
        }
        let state = AdamState::new(params.len());
        Ok(Trainer {
            examples,
            cfg,
            params,
            state,
            order: Vec::new(),
            cursor: 0,
            epoch: 0,
            losses: Vec::new(),
        })
    }

    fn next_batch(&mut self) -> Vec<(&'a StimulusTensor, f64)> {
        let mut batch = Vec::with_capacity(self.cfg.batch_size);
        while batch.len() < self.cfg.batch_size.min(self.examples.len()) {
            if self.cursor == self.order.len() {
                self.order = (0..self.examples.len()).collect();
                let mut rng = stream_rng(self.cfg.seed, SHUFFLE_DOMAIN, self.epoch);
                self.order.shuffle(&mut rng);
                self.epoch += 1;
                self.cursor = 0;
            }
            batch.push(self.examples[self.order[self.cursor]]);
            self.cursor += 1;
        }
        batch
    }

    /// One optimizer step; returns the mini-batch loss before the update.
    pub fn step(&mut self) -> Result<f64> {
        let batch = self.next_batch();
        let (loss, grads) = self.params.backward(&batch)?;
        adam_step(
            self.params.as_mut_slice(),
            grads.as_slice(),
            &mut self.state,
            self.cfg.learning_rate,
            &self.cfg.adam,
        );
        self.losses.push(loss);
        Ok(loss)
    }

    pub fn steps_taken(&self) -> usize {
        self.losses.len()
    }

    pub fn params(&self) -> &HeadParams {
        &self.params
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Mean squared error of the current head over every example.
    pub fn full_loss(&self) -> Result<f64> {
        mse(&self.params, self.examples)
    }

    pub fn run(mut self) -> Result<TrainOutcome> {
        while self.steps_taken() < self.cfg.max_steps {
            self.step()?;
        }
        Ok(TrainOutcome {
            params: self.params,
            losses: self.losses,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: HeadParams,
    /// Mini-batch loss at every step.
    pub losses: Vec<f64>,
}

pub fn mse(p: &HeadParams, examples: &[(&StimulusTensor, f64)]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("example set"));
    }
    let mut total = 0.0;
    for (t, y) in examples {
        total += (p.forward(t)? - y).powi(2);
    }
    Ok(total / examples.len() as f64)
}

/// Train for `cfg.max_steps` steps from the seeded initialization.
pub fn train_head(examples: &[(&StimulusTensor, f64)], cfg: TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(examples, cfg)?.run()
}

pub fn predict(p: &HeadParams, tensors: &[&StimulusTensor]) -> Result<Vec<f64>> {
    tensors.iter().map(|t| p.forward(t)).collect()
}
