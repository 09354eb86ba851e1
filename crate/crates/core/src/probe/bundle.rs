//! Trained heads on disk: a flat `<f8` NPY parameter file next to a JSON
//! descriptor, plus the predictions CSV.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::npy;
use crate::error::{Error, Result};
use crate::probe::head::{HeadParams, ACTIVATION};
use crate::probe::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleDescriptor {
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "H")]
    pub hidden: usize,
    pub activation: String,
    pub seed: u64,
    pub config: TrainConfig,
    pub head_id: String,
    /// Parameter file, relative to the descriptor.
    pub params_file: String,
    /// Order of the blocks inside the flat parameter vector.
    pub layout: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBundle {
    pub descriptor: BundleDescriptor,
    pub params: HeadParams,
}

impl ProbeBundle {
    pub fn new(head_id: impl Into<String>, params: HeadParams, config: TrainConfig) -> Self {
        let head_id = head_id.into();
        ProbeBundle {
            descriptor: BundleDescriptor {
                layers: params.layers(),
                dim: params.dim(),
                hidden: params.hidden(),
                activation: ACTIVATION.into(),
                seed: config.seed,
                config,
                params_file: format!("{head_id}.npy"),
                head_id,
                layout: params.blocks().iter().map(|(n, _)| n.to_string()).collect(),
            },
            params,
        }
    }

    /// Write `<dir>/<head_id>.json` and the parameter file; returns the descriptor path.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        npy::write_f64(
            &dir.join(&self.descriptor.params_file),
            &[self.params.len()],
            self.params.as_slice(),
        )?;
        let json_path = dir.join(format!("{}.json", self.descriptor.head_id));
        let mut text = serde_json::to_string_pretty(&self.descriptor).expect("descriptor serializes");
        text.push('\n');
        fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
        Ok(json_path)
    }

    pub fn load(json_path: impl AsRef<Path>) -> Result<Self> {
        let json_path = json_path.as_ref();
        let text = fs::read_to_string(json_path).map_err(|e| Error::io(json_path, e))?;
        let descriptor: BundleDescriptor =
            serde_json::from_str(&text).map_err(|e| Error::ManifestParse {
                path: json_path.to_path_buf(),
                reason: e.to_string(),
            })?;
        if descriptor.activation != ACTIVATION {
            return Err(Error::Config(format!(
                "unsupported activation {:?}",
                descriptor.activation
            )));
        }
        let base = json_path.parent().unwrap_or(Path::new("."));
        let (shape, flat) = npy::read_f64(&base.join(&descriptor.params_file))?;
        if shape.len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "parameter file must be 1-D, got shape {shape:?}"
            )));
        }
        let params = HeadParams::from_flat(descriptor.layers, descriptor.dim, descriptor.hidden, flat)?;
        Ok(ProbeBundle { descriptor, params })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub stimulus_id: String,
    pub prediction: f64,
    pub head_id: String,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

pub fn write_predictions<W: Write>(out: W, rows: &[Prediction]) -> Result<()> {
    let err = csv_err(Path::new("<predictions>"));
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(&err)?;
    }
    if rows.is_empty() {
        w.write_record(["stimulus_id", "prediction", "head_id"]).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))
}

pub fn read_predictions<R: Read>(input: R) -> Result<Vec<Prediction>> {
    let err = csv_err(Path::new("<predictions>"));
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(&err))
        .collect()
}
