//! On-disk dataset contract: one `(L, T, D)` float32 NPY file per stimulus plus a
//! JSON manifest describing roles, groups and pairing.

pub mod manifest;
pub mod npy;
pub mod tensor;
pub mod validate;

pub use manifest::{
    load_manifest, write_manifest, DatasetManifest, Role, StimulusRecord, VALENCE_KEY,
};
pub use tensor::{read_tensor, write_tensor, StimulusTensor};
pub use validate::{match_design, validate_dataset, Dataset, Issue, MatchDesign, ValidationReport};
