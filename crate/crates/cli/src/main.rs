mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use speat_core::ErrorKind;

/// Bias audits for multi-layer speech embeddings.
#[derive(Debug, Parser)]
#[command(name = "speat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a dataset manifest and its tensors.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Effect size, optional permutation test and bootstrap curve for one test.
    Audit(AuditArgs),
    /// Bootstrap standard error of the effect size over target sample sizes.
    Bootstrap(BootstrapArgs),
    /// Downstream valence probe.
    #[command(subcommand)]
    Probe(ProbeCommand),
    /// Write a synthetic dataset with a planted association.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Group label of the first target concept (default: the target_x group).
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    y: Option<String>,
    /// Group label of the first attribute concept (default: the attribute_a group).
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    /// Pooling as <temporal>+<layer>, e.g. mean+sum or max+q2.
    #[arg(long, default_value = "mean+sum")]
    aggregation: String,
    #[arg(long, env = "SPEAT_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NhstChoice {
    Auto,
    Exact,
    Mc,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnitChoice {
    /// Pairs when every target is matched, individuals otherwise.
    Auto,
    Individual,
    Pair,
}

#[derive(Debug, Args)]
struct BootArgs {
    /// Target sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    bootstrap_sizes: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    replicates: usize,
    #[arg(long, value_enum, default_value_t = UnitChoice::Auto)]
    unit: UnitChoice,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    test: TestArgs,
    #[arg(long, value_enum, default_value_t = NhstChoice::Auto)]
    nhst: NhstChoice,
    /// Monte-Carlo draws when the permutation test cannot enumerate.
    #[arg(long, default_value_t = 100_000)]
    mc_draws: u64,
    /// Largest partition count enumerated exactly under --nhst auto.
    #[arg(long, default_value_t = 200_000)]
    max_exact: u64,
    /// Reference IAT effect for the congruence verdict.
    #[arg(long, allow_negative_numbers = true)]
    iat_d: Option<f64>,
    #[command(flatten)]
    boot: BootArgs,
}

#[derive(Debug, Args)]
struct BootstrapArgs {
    #[command(flatten)]
    test: TestArgs,
    #[command(flatten)]
    boot: BootArgs,
}

#[derive(Debug, Subcommand)]
enum ProbeCommand {
    /// Train one head per learning rate on the labeled records.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Learning rates, comma separated.
        #[arg(long = "lr", value_delimiter = ',', default_values_t = speat_core::probe::DEFAULT_LEARNING_RATES)]
        learning_rates: Vec<f64>,
        #[arg(long, default_value_t = 20_000)]
        max_steps: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        /// Train only on these groups; every record in them must be labeled.
        #[arg(long, value_delimiter = ',')]
        groups: Vec<String>,
        #[arg(long, env = "SPEAT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict valence for every record with one or more trained heads.
    Predict {
        #[arg(long)]
        manifest: PathBuf,
        /// Head descriptor JSON; repeatable.
        #[arg(long = "bundle", required = true)]
        bundles: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cohen's d between the two target groups' predictions, pooled across heads.
    Bias {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "bundle", required_unless_present = "predictions", conflicts_with = "predictions")]
        bundles: Vec<PathBuf>,
        /// Predictions CSV; repeatable.
        #[arg(long)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LabelChoice {
    None,
    Attributes,
    All,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "SPEAT_SEED", default_value_t = 0)]
    seed: u64,
    /// Offset of the target groups along the attribute axis.
    #[arg(long, default_value_t = 0.35, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    layers: usize,
    /// Stimuli per target group.
    #[arg(long, default_value_t = 60)]
    n_targets: usize,
    /// Stimuli per attribute group.
    #[arg(long, default_value_t = 20)]
    n_attributes: usize,
    /// Match targets into pairs sharing part of their noise.
    #[arg(long)]
    paired: bool,
    #[arg(long, default_value_t = 0.5)]
    shared_noise: f64,
    /// Which records receive a valence label.
    #[arg(long, value_enum, default_value_t = LabelChoice::None)]
    labels: LabelChoice,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Io => 1,
        ErrorKind::Validation => 2,
        ErrorKind::Degenerate => 3,
        ErrorKind::Config => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit_code(ErrorKind::Config))
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
