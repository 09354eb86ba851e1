use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Meta key under which a real-valued valence label is stored.
pub const VALENCE_KEY: &str = "valence";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    TargetX,
    TargetY,
    AttributeA,
    AttributeB,
}

impl Role {
    pub const ALL: [Role; 4] = [
        Role::TargetX,
        Role::TargetY,
        Role::AttributeA,
        Role::AttributeB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::TargetX => "target_x",
            Role::TargetY => "target_y",
            Role::AttributeA => "attribute_a",
            Role::AttributeB => "attribute_b",
        }
    }

    pub fn is_target(self) -> bool {
        matches!(self, Role::TargetX | Role::TargetY)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusRecord {
    pub id: String,
    pub role: Role,
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_id: Option<String>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    pub tensor_path: String,
}

impl StimulusRecord {
    /// The pairing key; an empty string counts as absent.
    pub fn match_key(&self) -> Option<&str> {
        self.match_id.as_deref().filter(|m| !m.is_empty())
    }

    /// Valence label from `meta["valence"]`, if present.
    pub fn valence(&self) -> Option<Result<f64>> {
        self.meta.get(VALENCE_KEY).map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Config(format!("record {:?}: bad valence {v:?}", self.id)))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub model_id: String,
    pub layers: usize,
    pub dim: usize,
    pub records: Vec<StimulusRecord>,
    /// Directory the tensor paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

// Roles are read as plain strings first so an unknown role gets its own error.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    role: String,
    group: String,
    #[serde(default)]
    match_id: Option<String>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
    tensor_path: String,
}

#[derive(Deserialize)]
struct RawManifest {
    model_id: String,
    layers: usize,
    dim: usize,
    records: Vec<RawRecord>,
}

impl DatasetManifest {
    pub fn tensor_path(&self, record: &StimulusRecord) -> PathBuf {
        self.base_dir.join(&record.tensor_path)
    }

    pub fn records_with_role(&self, role: Role) -> impl Iterator<Item = (usize, &StimulusRecord)> {
        self.records
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.role == role)
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let origin: PathBuf = base_dir.into();
        let raw: RawManifest = serde_json::from_str(text).map_err(|e| Error::ManifestParse {
            path: origin.clone(),
            reason: e.to_string(),
        })?;
        let mut seen = HashSet::new();
        let mut records = Vec::with_capacity(raw.records.len());
        for r in raw.records {
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateId(r.id));
            }
            records.push(StimulusRecord {
                role: r.role.parse()?,
                id: r.id,
                group: r.group,
                match_id: r.match_id,
                meta: r.meta,
                tensor_path: r.tensor_path,
            });
        }
        Ok(DatasetManifest {
            model_id: raw.model_id,
            layers: raw.layers,
            dim: raw.dim,
            records,
            base_dir: origin,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Parse a manifest document. Tensor files are not touched.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    DatasetManifest::from_json(&text, base).map_err(|e| match e {
        Error::ManifestParse { reason, .. } => Error::ManifestParse {
            path: path.to_path_buf(),
            reason,
        },
        other => other,
    })
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<()> {
    let path = path.as_ref();
    let mut text = manifest.to_json();
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
