use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use speat_core::aggregation::AggregationConfig;
use speat_core::association::{
    congruence, AssociationScore, CongruenceVerdict, EatResult, NhstMethod, PermutationConfig,
};
use speat_core::audit::{EatSpec, PreparedTest};
use speat_core::bootstrap::{bootstrap_se, BootstrapConfig, ResampleUnit, SeCurve};
use speat_core::dataset::{load_manifest, validate_dataset, Dataset, DatasetManifest, Role};
use speat_core::probe::{
    cohens_d, mse, predict, read_predictions, train_head, training_examples, write_predictions,
    CohenResult, Prediction, ProbeBundle, TrainConfig,
};
use speat_core::synth::{generate, LabelRule, LabelScope, SynthConfig};
use speat_core::{Error, Result};

use crate::svg;
use crate::{
    AuditArgs, BootArgs, BootstrapArgs, Command, LabelChoice, NhstChoice, ProbeCommand,
    SynthArgs, TestArgs, UnitChoice,
};

/// Bumped whenever a field of a JSON report changes meaning or disappears.
const SCHEMA_VERSION: u32 = 1;

pub fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Validate { manifest, json } => validate(&manifest, json),
        Command::Audit(args) => audit(args).map(|_| 0),
        Command::Bootstrap(args) => bootstrap(args).map(|_| 0),
        Command::Probe(p) => probe(p).map(|_| 0),
        Command::Synth(args) => synth(args).map(|_| 0),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    write_file(path, text)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Config(format!("cannot write csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Config(format!("cannot write csv: {e}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Load a manifest and its tensors, printing every issue before failing.
fn load_dataset(path: &Path) -> Result<Dataset> {
    let m = load_manifest(path)?;
    let report = validate_dataset(&m);
    if !report.ok {
        for i in &report.issues {
            eprintln!("{}: {}", i.record, i.description);
        }
    }
    Dataset::load(m)
}

fn validate(path: &Path, json: bool) -> Result<u8> {
    let m = load_manifest(path)?;
    let report = validate_dataset(&m);
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else if report.ok {
        println!("ok: {} records, L={}, D={}", m.records.len(), m.layers, m.dim);
    } else {
        println!("{} issue(s)", report.issues.len());
        for i in &report.issues {
            println!("  {}: {}", i.record, i.description);
        }
    }
    Ok(if report.ok { 0 } else { 2 })
}

/// The single group carrying `role`, for labels left unspecified.
fn role_group(m: &DatasetManifest, role: Role) -> Result<String> {
    let mut groups: Vec<&str> = m.records_with_role(role).map(|(_, r)| r.group.as_str()).collect();
    groups.sort_unstable();
    groups.dedup();
    match groups.as_slice() {
        [one] => Ok(one.to_string()),
        [] => Err(Error::Config(format!("no records with role {role}"))),
        many => Err(Error::Config(format!(
            "role {role} spans groups {many:?}; pass the group label explicitly"
        ))),
    }
}

fn label_or_role(m: &DatasetManifest, given: &Option<String>, role: Role) -> Result<String> {
    match given {
        Some(g) => Ok(g.clone()),
        None => role_group(m, role),
    }
}

fn eat_spec(m: &DatasetManifest, t: &TestArgs) -> Result<EatSpec> {
    Ok(EatSpec {
        x_label: label_or_role(m, &t.x, Role::TargetX)?,
        y_label: label_or_role(m, &t.y, Role::TargetY)?,
        a_label: label_or_role(m, &t.a, Role::AttributeA)?,
        b_label: label_or_role(m, &t.b, Role::AttributeB)?,
        aggregation: t.aggregation.parse::<AggregationConfig>()?,
    })
}

fn boot_config(test: &PreparedTest, b: &BootArgs, seed: u64) -> BootstrapConfig {
    let unit = match b.unit {
        UnitChoice::Individual => ResampleUnit::Individual,
        UnitChoice::Pair => ResampleUnit::Pair,
        UnitChoice::Auto if test.pairs.is_some() => ResampleUnit::Pair,
        UnitChoice::Auto => ResampleUnit::Individual,
    };
    BootstrapConfig {
        replicates: b.replicates,
        ..BootstrapConfig::new(b.bootstrap_sizes.clone(), unit, seed)
    }
}

fn write_curve(out: &Path, curve: &SeCurve) -> Result<()> {
    let mut bytes = Vec::new();
    curve.write_csv(&mut bytes)?;
    write_file(&out.join("se_curve.csv"), bytes)?;
    let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.k as f64, p.se)).collect();
    write_file(
        &out.join("se_curve.svg"),
        svg::line("Bootstrap SE of d", "targets per group (k)", "SE", &pts),
    )
}

#[derive(Serialize)]
struct TestEcho<'a> {
    manifest: String,
    model_id: &'a str,
    spec: &'a EatSpec,
    seed: u64,
}

#[derive(Serialize)]
struct AuditEcho<'a> {
    #[serde(flatten)]
    test: TestEcho<'a>,
    nhst: Option<PermutationConfig>,
    bootstrap: Option<&'a BootstrapConfig>,
    iat_d: Option<f64>,
}

#[derive(Serialize)]
struct AuditReport<'a> {
    schema_version: u32,
    command: &'static str,
    config: AuditEcho<'a>,
    result: &'a EatResult,
    s_scores: Vec<AssociationScore>,
    congruence: Option<CongruenceVerdict>,
    se_curve: Option<&'a SeCurve>,
}

fn prepare(t: &TestArgs) -> Result<(Dataset, EatSpec, PreparedTest)> {
    let ds = load_dataset(&t.manifest)?;
    let spec = eat_spec(&ds.manifest, t)?;
    let test = PreparedTest::new(&ds, &spec)?;
    create_dir(&t.out)?;
    Ok((ds, spec, test))
}

fn audit(args: AuditArgs) -> Result<()> {
    let t = &args.test;
    let (ds, spec, test) = prepare(t)?;
    let nhst = match args.nhst {
        NhstChoice::Off => None,
        choice => Some(PermutationConfig {
            method: match choice {
                NhstChoice::Exact => NhstMethod::Exact,
                NhstChoice::Mc => NhstMethod::MonteCarlo,
                _ => NhstMethod::Auto,
            },
            max_exact: args.max_exact,
            mc_draws: args.mc_draws,
            seed: t.seed,
        }),
    };
    let result = test.run(nhst.as_ref())?;
    let boot = (!args.boot.bootstrap_sizes.is_empty()).then(|| boot_config(&test, &args.boot, t.seed));
    let curve = boot.as_ref().map(|b| bootstrap_se(&test, b)).transpose()?;
    let scores = test.labelled_scores(&result);

    let report = AuditReport {
        schema_version: SCHEMA_VERSION,
        command: "audit",
        config: AuditEcho {
            test: TestEcho {
                manifest: t.manifest.display().to_string(),
                model_id: &ds.manifest.model_id,
                spec: &spec,
                seed: t.seed,
            },
            nhst,
            bootstrap: boot.as_ref(),
            iat_d: args.iat_d,
        },
        result: &result,
        s_scores: scores.clone(),
        congruence: args.iat_d.map(|iat| congruence(result.d, iat)),
        se_curve: curve.as_ref(),
    };
    write_json(&t.out.join("audit.json"), &report)?;

    let rows = scores.iter().enumerate().map(|(i, s)| {
        let group = if i < result.n_x { &spec.x_label } else { &spec.y_label };
        vec![s.stimulus_id.clone(), group.clone(), s.s.to_string()]
    });
    write_file(&t.out.join("scores.csv"), csv_bytes(&["stimulus_id", "group", "s"], rows)?)?;
    write_file(
        &t.out.join("scores.svg"),
        svg::group_scatter(
            &format!("Association scores ({}, d = {:.3})", spec.aggregation, result.d),
            "s(w, A, B)",
            &[(&spec.x_label, &result.s_x), (&spec.y_label, &result.s_y)],
        ),
    )?;
    if let Some(c) = &curve {
        write_curve(&t.out, c)?;
    }
    match result.p_value {
        Some(p) => println!("d = {:.6}, p = {p:.6}", result.d),
        None => println!("d = {:.6}", result.d),
    }
    Ok(())
}

#[derive(Serialize)]
struct BootstrapReport<'a> {
    schema_version: u32,
    command: &'static str,
    config: BootstrapEcho<'a>,
    se_curve: &'a SeCurve,
}

#[derive(Serialize)]
struct BootstrapEcho<'a> {
    #[serde(flatten)]
    test: TestEcho<'a>,
    bootstrap: &'a BootstrapConfig,
}

fn bootstrap(args: BootstrapArgs) -> Result<()> {
    if args.boot.bootstrap_sizes.is_empty() {
        return Err(Error::Config("--bootstrap-sizes is required".into()));
    }
    let t = &args.test;
    let (ds, spec, test) = prepare(t)?;
    let cfg = boot_config(&test, &args.boot, t.seed);
    let curve = bootstrap_se(&test, &cfg)?;
    write_json(
        &t.out.join("bootstrap.json"),
        &BootstrapReport {
            schema_version: SCHEMA_VERSION,
            command: "bootstrap",
            config: BootstrapEcho {
                test: TestEcho {
                    manifest: t.manifest.display().to_string(),
                    model_id: &ds.manifest.model_id,
                    spec: &spec,
                    seed: t.seed,
                },
                bootstrap: &cfg,
            },
            se_curve: &curve,
        },
    )?;
    write_curve(&t.out, &curve)?;
    for p in &curve.points {
        println!("k = {}: se = {:.6}", p.k, p.se);
    }
    Ok(())
}

fn head_id(lr: f64) -> String {
    format!("head_lr{lr:e}")
}

#[derive(Serialize)]
struct HeadSummary {
    head_id: String,
    descriptor: String,
    learning_rate: f64,
    steps: usize,
    final_batch_loss: f64,
    train_mse: f64,
}

#[derive(Serialize)]
struct TrainReport {
    schema_version: u32,
    command: &'static str,
    manifest: String,
    examples: usize,
    groups: Option<Vec<String>>,
    heads: Vec<HeadSummary>,
}

fn probe(cmd: ProbeCommand) -> Result<()> {
    match cmd {
        ProbeCommand::Train {
            manifest,
            learning_rates,
            max_steps,
            batch_size,
            groups,
            seed,
            out,
        } => {
            let ds = load_dataset(&manifest)?;
            let groups = (!groups.is_empty()).then_some(groups);
            let examples = training_examples(&ds, groups.as_deref())?;
            create_dir(&out)?;
            let mut heads = Vec::new();
            for &lr in &learning_rates {
                let cfg = TrainConfig {
                    max_steps,
                    batch_size,
                    ..TrainConfig::new(lr, seed)
                };
                let outcome = train_head(&examples, cfg)?;
                let train_mse = mse(&outcome.params, &examples)?;
                let id = head_id(lr);
                let json = ProbeBundle::new(&id, outcome.params, cfg).save(&out)?;
                let rows = outcome
                    .losses
                    .iter()
                    .enumerate()
                    .map(|(i, l)| vec![(i + 1).to_string(), l.to_string()]);
                write_file(&out.join(format!("loss_{id}.csv")), csv_bytes(&["step", "loss"], rows)?)?;
                let pts: Vec<(f64, f64)> = outcome
                    .losses
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| ((i + 1) as f64, l))
                    .collect();
                write_file(
                    &out.join(format!("loss_{id}.svg")),
                    svg::line(&format!("Training loss, lr = {lr:e}"), "step", "batch MSE", &pts),
                )?;
                let summary = HeadSummary {
                    head_id: id,
                    descriptor: json.file_name().unwrap().to_string_lossy().into_owned(),
                    learning_rate: lr,
                    steps: outcome.losses.len(),
                    final_batch_loss: outcome.losses.last().copied().unwrap_or(f64::NAN),
                    train_mse,
                };
                println!("{}: mse = {:.6}", summary.head_id, summary.train_mse);
                heads.push(summary);
            }
            write_json(
                &out.join("train.json"),
                &TrainReport {
                    schema_version: SCHEMA_VERSION,
                    command: "probe train",
                    manifest: manifest.display().to_string(),
                    examples: examples.len(),
                    groups,
                    heads,
                },
            )
        }
        ProbeCommand::Predict { manifest, bundles, out } => {
            let ds = load_dataset(&manifest)?;
            let rows = predict_all(&ds, &bundles)?;
            create_dir(&out)?;
            let mut bytes = Vec::new();
            write_predictions(&mut bytes, &rows)?;
            let path = out.join("predictions.csv");
            write_file(&path, bytes)?;
            println!("{}", path.display());
            Ok(())
        }
        ProbeCommand::Bias {
            manifest,
            bundles,
            predictions,
            x,
            y,
            out,
        } => {
            let m = load_manifest(&manifest)?;
            let rows = if bundles.is_empty() {
                read_prediction_files(&predictions)?
            } else {
                predict_all(&load_dataset(&manifest)?, &bundles)?
            };
            let x = label_or_role(&m, &x, Role::TargetX)?;
            let y = label_or_role(&m, &y, Role::TargetY)?;
            let result = bias(&m, &rows, &x, &y)?;
            let report = BiasReport {
                schema_version: SCHEMA_VERSION,
                command: "probe bias",
                manifest: manifest.display().to_string(),
                x_label: x,
                y_label: y,
                heads: distinct_heads(&rows),
                result,
            };
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Some(out) = out {
                create_dir(&out)?;
                write_file(&out.join("bias.json"), format!("{text}\n"))?;
            }
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct BiasReport {
    schema_version: u32,
    command: &'static str,
    manifest: String,
    x_label: String,
    y_label: String,
    heads: Vec<String>,
    result: CohenResult,
}

fn predict_all(ds: &Dataset, bundles: &[PathBuf]) -> Result<Vec<Prediction>> {
    let tensors: Vec<_> = ds.tensors.iter().collect();
    let mut rows = Vec::new();
    for path in bundles {
        let b = ProbeBundle::load(path)?;
        let preds = predict(&b.params, &tensors)?;
        rows.extend(ds.manifest.records.iter().zip(preds).map(|(r, p)| Prediction {
            stimulus_id: r.id.clone(),
            prediction: p,
            head_id: b.descriptor.head_id.clone(),
        }));
    }
    Ok(rows)
}

fn read_prediction_files(paths: &[PathBuf]) -> Result<Vec<Prediction>> {
    let mut rows = Vec::new();
    for p in paths {
        let f = fs::File::open(p).map_err(io_err(p))?;
        rows.extend(read_predictions(f)?);
    }
    Ok(rows)
}

fn distinct_heads(rows: &[Prediction]) -> Vec<String> {
    let mut heads: Vec<String> = rows.iter().map(|r| r.head_id.clone()).collect();
    heads.sort();
    heads.dedup();
    heads
}

/// Predictions of every head for the two groups, pooled into one sample per group.
fn bias(m: &DatasetManifest, rows: &[Prediction], x: &str, y: &str) -> Result<CohenResult> {
    let group_of: HashMap<&str, &str> = m
        .records
        .iter()
        .map(|r| (r.id.as_str(), r.group.as_str()))
        .collect();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let (mut px, mut py) = (Vec::new(), Vec::new());
    for r in rows {
        let group = *group_of
            .get(r.stimulus_id.as_str())
            .ok_or_else(|| Error::Config(format!("prediction for unknown stimulus {:?}", r.stimulus_id)))?;
        if group == x {
            px.push(r.prediction);
        } else if group == y {
            py.push(r.prediction);
        } else {
            continue;
        }
        *seen.entry(r.stimulus_id.as_str()).or_default() += 1;
    }
    for rec in m.records.iter().filter(|r| r.group == x || r.group == y) {
        if !seen.contains_key(rec.id.as_str()) {
            return Err(Error::Config(format!("no prediction for stimulus {:?}", rec.id)));
        }
    }
    cohens_d(&px, &py)
}

fn synth(a: SynthArgs) -> Result<()> {
    let label_rule = match a.labels {
        LabelChoice::None => None,
        LabelChoice::Attributes => Some(LabelRule::valence_axis(a.dim, LabelScope::Attributes)),
        LabelChoice::All => Some(LabelRule::valence_axis(a.dim, LabelScope::All)),
    };
    let cfg = SynthConfig {
        dim: a.dim,
        layers: a.layers,
        n_x: a.n_targets,
        n_y: a.n_targets,
        n_a: a.n_attributes,
        n_b: a.n_attributes,
        delta: a.delta,
        noise: a.noise,
        paired: a.paired,
        shared_noise: a.shared_noise,
        label_rule,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let path = generate(&cfg, &a.out)?;
    println!("{}", path.display());
    Ok(())
}
