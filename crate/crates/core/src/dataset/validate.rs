use std::collections::HashMap;

use serde::Serialize;

use crate::dataset::manifest::{DatasetManifest, Role};
use crate::dataset::tensor::{read_tensor, StimulusTensor};
use crate::error::{Error, Result};

/// Record id used for issues that concern the dataset as a whole.
pub const DATASET_SCOPE: &str = "(dataset)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub record: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    fn from_issues(issues: Vec<Issue>) -> Self {
        ValidationReport {
            ok: issues.is_empty(),
            issues,
        }
    }
}

/// Pairing structure of the target stimuli.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchDesign {
    Unmatched,
    Matched,
    Mixed,
}

pub fn match_design(m: &DatasetManifest) -> MatchDesign {
    let (mut with, mut without) = (0usize, 0usize);
    for r in m.records.iter().filter(|r| r.role.is_target()) {
        if r.match_key().is_some() {
            with += 1;
        } else {
            without += 1;
        }
    }
    match (with, without) {
        (0, _) => MatchDesign::Unmatched,
        (_, 0) => MatchDesign::Matched,
        _ => MatchDesign::Mixed,
    }
}

fn structural_issues(m: &DatasetManifest, issues: &mut Vec<Issue>) {
    let mut push = |record: &str, description: String| {
        issues.push(Issue {
            record: record.to_string(),
            description,
        })
    };

    if m.layers == 0 || m.dim == 0 {
        push(
            DATASET_SCOPE,
            format!("manifest declares layers={} dim={}", m.layers, m.dim),
        );
    }
    for role in Role::ALL {
        if m.records_with_role(role).next().is_none() {
            push(DATASET_SCOPE, format!("no records with role {role}"));
        }
    }

    match match_design(m) {
        MatchDesign::Unmatched => {}
        MatchDesign::Mixed => {
            for r in m.records.iter().filter(|r| r.role.is_target()) {
                if r.match_key().is_none() {
                    push(
                        &r.id,
                        "target lacks match_id while other targets are matched".into(),
                    );
                }
            }
        }
        MatchDesign::Matched => {
            let mut by_role: HashMap<Role, HashMap<&str, &str>> = HashMap::new();
            for r in m.records.iter().filter(|r| r.role.is_target()) {
                let key = r.match_key().expect("matched design");
                let slot = by_role.entry(r.role).or_default();
                if let Some(prev) = slot.insert(key, &r.id) {
                    push(
                        &r.id,
                        format!("match_id {key:?} already used by {prev:?} in role {}", r.role),
                    );
                }
            }
            let empty = HashMap::new();
            let xs = by_role.get(&Role::TargetX).unwrap_or(&empty);
            let ys = by_role.get(&Role::TargetY).unwrap_or(&empty);
            for r in m.records.iter().filter(|r| r.role.is_target()) {
                let key = r.match_key().expect("matched design");
                let partners = if r.role == Role::TargetX { ys } else { xs };
                if !partners.contains_key(key) {
                    push(
                        &r.id,
                        format!("match_id {key:?} has no partner in the opposite target role"),
                    );
                }
            }
        }
    }
}

fn tensor_issue(m: &DatasetManifest, t: &StimulusTensor) -> Option<String> {
    (t.layers() != m.layers || t.dim() != m.dim).then(|| {
        format!(
            "tensor shape {:?} does not match manifest (layers={}, dim={})",
            t.shape(),
            m.layers,
            m.dim
        )
    })
}

/// Check every record and tensor. Issues are collected, never thrown.
pub fn validate_dataset(m: &DatasetManifest) -> ValidationReport {
    let mut issues = Vec::new();
    structural_issues(m, &mut issues);
    for r in &m.records {
        match read_tensor(m.tensor_path(r)) {
            Ok(t) => {
                if let Some(description) = tensor_issue(m, &t) {
                    issues.push(Issue {
                        record: r.id.clone(),
                        description,
                    });
                }
            }
            Err(e) => issues.push(Issue {
                record: r.id.clone(),
                description: e.to_string(),
            }),
        }
    }
    ValidationReport::from_issues(issues)
}

/// A validated manifest with its tensors resident in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub tensors: Vec<StimulusTensor>,
}

impl Dataset {
    /// Load all tensors, failing with [`Error::Validation`] if the dataset is inconsistent.
    pub fn load(manifest: DatasetManifest) -> Result<Self> {
        let report = validate_dataset(&manifest);
        if !report.ok {
            return Err(Error::Validation(report.issues.len()));
        }
        let tensors = manifest
            .records
            .iter()
            .map(|r| read_tensor(manifest.tensor_path(r)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { manifest, tensors })
    }

    /// Build directly from in-memory parts, applying the same checks minus file access.
    pub fn from_parts(manifest: DatasetManifest, tensors: Vec<StimulusTensor>) -> Result<Self> {
        if tensors.len() != manifest.records.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} records but {} tensors",
                manifest.records.len(),
                tensors.len()
            )));
        }
        let mut issues = Vec::new();
        structural_issues(&manifest, &mut issues);
        for (r, t) in manifest.records.iter().zip(&tensors) {
            if let Some(description) = tensor_issue(&manifest, t) {
                issues.push(Issue {
                    record: r.id.clone(),
                    description,
                });
            }
        }
        if !issues.is_empty() {
            return Err(Error::Validation(issues.len()));
        }
        Ok(Dataset { manifest, tensors })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::dataset::manifest::StimulusRecord;
    use crate::dataset::tensor::write_tensor;

    fn fixture(dir: &std::path::Path, match_ids: [Option<&str>; 4]) -> DatasetManifest {
        let roles = [
            Role::TargetX,
            Role::TargetX,
            Role::TargetY,
            Role::TargetY,
            Role::AttributeA,
            Role::AttributeB,
        ];
        let mut records = Vec::new();
        for (i, role) in roles.into_iter().enumerate() {
            let id = format!("s{i}");
            let path = format!("{id}.npy");
            let t = StimulusTensor::from_fn(2, 1 + i, 3, |l, t, d| (l + t + d + i) as f32 + 0.5)
                .unwrap();
            write_tensor(dir.join(&path), &t).unwrap();
            records.push(StimulusRecord {
                id,
                role,
                group: role.as_str().to_string(),
                match_id: match_ids.get(i).copied().flatten().map(String::from),
                meta: BTreeMap::new(),
                tensor_path: path,
            });
        }
        DatasetManifest {
            model_id: "fixture".into(),
            layers: 2,
            dim: 3,
            records,
            base_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn consistent_dataset_passes() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path(), [Some("p0"), Some("p1"), Some("p1"), Some("p0")]);
        let report = validate_dataset(&m);
        assert_eq!(report, ValidationReport { ok: true, issues: vec![] });
        assert_eq!(match_design(&m), MatchDesign::Matched);
        // pure: a second call gives the same report
        assert_eq!(validate_dataset(&m), report);
    }

    #[test]
    fn partnerless_match_id_reported() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path(), [Some("p0"), Some("lonely"), Some("p1"), Some("p0")]);
        let report = validate_dataset(&m);
        assert!(!report.ok);
        let ids: Vec<_> = report.issues.iter().map(|i| i.record.as_str()).collect();
        assert!(ids.contains(&"s1"));
        assert!(ids.contains(&"s2"));
    }

    #[test]
    fn mixed_design_reported() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path(), [Some("p0"), None, Some("p1"), Some("p0")]);
        let report = validate_dataset(&m);
        assert!(!report.ok);
        assert!(report.issues.iter().any(|i| i.record == "s1"));
    }

    #[test]
    fn wrong_dim_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path(), [None; 4]);
        let bad = StimulusTensor::new(2, 1, 4, vec![1.0; 8]).unwrap();
        write_tensor(dir.path().join("s3.npy"), &bad).unwrap();
        let report = validate_dataset(&m);
        assert!(!report.ok);
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].record, "s3");
        assert!(report.issues[0].description.contains("shape"));
        assert!(matches!(
            Dataset::load(m),
            Err(Error::Validation(1))
        ));
    }

    #[test]
    fn missing_role_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path(), [None; 4]);
        m.records.retain(|r| r.role != Role::AttributeB);
        std::fs::remove_file(dir.path().join("s0.npy")).unwrap();
        let report = validate_dataset(&m);
        assert!(report
            .issues
            .iter()
            .any(|i| i.record == DATASET_SCOPE && i.description.contains("attribute_b")));
        assert!(report.issues.iter().any(|i| i.record == "s0"));
    }
}
