//! The on-disk format an extractor must produce: float32 NPY tensors of shape
//! (L, T, D) plus `manifest.json`. Fixtures under `tests/fixtures` were written
//! by numpy's `np.save`.

use std::fs;
use std::path::{Path, PathBuf};

use speat_core::dataset::npy;
use speat_core::dataset::{
    load_manifest, read_tensor, validate_dataset, write_manifest, write_tensor, Dataset,
    DatasetManifest,
};
use speat_core::synth::{generate, SynthConfig};
use speat_core::ErrorKind;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn reads_numpy_float32_tensor() {
    let t = read_tensor(fixture("arange_2x3x4_f32.npy")).unwrap();
    assert_eq!(t.shape(), (2, 3, 4));
    for (i, v) in t.values().iter().enumerate() {
        assert_eq!(*v, i as f32 / 8.0);
    }
    assert_eq!(t.get(1, 2, 3), 23.0 / 8.0);
}

#[test]
fn writer_matches_numpy_bytes() {
    let t = read_tensor(fixture("arange_2x3x4_f32.npy")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("copy.npy");
    write_tensor(&out, &t).unwrap();
    assert_eq!(fs::read(&out).unwrap(), fs::read(fixture("arange_2x3x4_f32.npy")).unwrap());

    let (shape, params) = npy::read_f64(&fixture("params_f64.npy")).unwrap();
    assert_eq!(shape, vec![7]);
    assert_eq!(params[0], -1.0);
    assert_eq!(params[6], 1.0);
    let out = dir.path().join("params.npy");
    npy::write_f64(&out, &shape, &params).unwrap();
    assert_eq!(fs::read(&out).unwrap(), fs::read(fixture("params_f64.npy")).unwrap());
}

#[test]
fn rejects_layouts_the_contract_excludes() {
    for name in ["fortran_f32.npy", "int_2x2x2.npy"] {
        let err = read_tensor(fixture(name)).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Validation, "{name}: {err}");
    }
}

/// An extractor that passes precomputed tensors straight through must
/// reproduce its input exactly.
#[test]
fn identity_extraction_is_bit_exact() {
    let src = tempfile::tempdir().unwrap();
    let manifest_path = generate(
        &SynthConfig {
            n_x: 3,
            n_y: 3,
            n_a: 2,
            n_b: 2,
            seed: 17,
            ..SynthConfig::default()
        },
        src.path(),
    )
    .unwrap();
    let m = load_manifest(&manifest_path).unwrap();

    let dst = tempfile::tempdir().unwrap();
    fs::create_dir_all(dst.path().join("tensors")).unwrap();
    for r in &m.records {
        let t = read_tensor(m.tensor_path(r)).unwrap();
        write_tensor(dst.path().join(&r.tensor_path), &t).unwrap();
    }
    let copy = DatasetManifest {
        base_dir: dst.path().to_path_buf(),
        ..m.clone()
    };
    write_manifest(dst.path().join("manifest.json"), &copy).unwrap();

    let again = load_manifest(dst.path().join("manifest.json")).unwrap();
    assert!(validate_dataset(&again).ok);
    for r in &again.records {
        assert_eq!(
            fs::read(again.tensor_path(r)).unwrap(),
            fs::read(m.tensor_path(r)).unwrap()
        );
    }
    let a = Dataset::load(m).unwrap();
    let b = Dataset::load(again).unwrap();
    assert_eq!(a.tensors, b.tensors);
    // constant (L, D) across the job
    assert!(b.tensors.iter().all(|t| t.layers() == 4 && t.dim() == 16));
}

#[test]
fn drift_in_layer_count_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = generate(
        &SynthConfig {
            n_x: 2,
            n_y: 2,
            n_a: 1,
            n_b: 1,
            ..SynthConfig::default()
        },
        dir.path(),
    )
    .unwrap();
    let m = load_manifest(&manifest_path).unwrap();
    let victim = m.tensor_path(&m.records[0]);
    let t = read_tensor(&victim).unwrap();
    let (l, steps, d) = t.shape();
    let fewer = speat_core::dataset::StimulusTensor::new(
        l - 1,
        steps,
        d,
        t.values()[..(l - 1) * steps * d].to_vec(),
    )
    .unwrap();
    write_tensor(&victim, &fewer).unwrap();
    let report = validate_dataset(&m);
    assert!(!report.ok);
    assert_eq!(report.issues.len(), 1);
    assert_eq!(report.issues[0].record, m.records[0].id);
}

#[test]
fn manifest_json_shape() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = generate(
        &SynthConfig {
            n_x: 2,
            n_y: 2,
            n_a: 1,
            n_b: 1,
            paired: true,
            ..SynthConfig::default()
        },
        dir.path(),
    )
    .unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(manifest_path).unwrap()).unwrap();
    assert_eq!(json["layers"], 4);
    assert_eq!(json["dim"], 16);
    let first = &json["records"][0];
    for key in ["id", "role", "group", "match_id", "meta", "tensor_path"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert_eq!(first["role"], "target_x");
}
