//! Downstream valence probe: a small regression head trained on frozen
//! embeddings, and Cohen's d on its predictions for the two target groups.

mod adam;
mod bundle;
mod cohen;
mod head;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use bundle::{read_predictions, write_predictions, BundleDescriptor, Prediction, ProbeBundle};
pub use cohen::{cohens_d, CohenResult};
pub use head::{ForwardTrace, HeadParams, ACTIVATION, HIDDEN};
pub use train::{
    mse, predict, train_head, training_examples, TrainConfig, TrainOutcome, Trainer,
    DEFAULT_LEARNING_RATES,
};
