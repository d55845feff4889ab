//! Command-line front end.
//!
//! One JSON config file plus flag overrides drives every subcommand; flags
//! win over config fields, and the seed resolves as flag, then config, then
//! the CATGEN_SEED environment variable, then 0. Each run writes its outputs
//! into a run directory together with a `manifest.json` recording the
//! command, the resolved seed, and a hash of the fully resolved config, so
//! identical invocations produce byte-identical artifacts.
//!
//! Exit codes: 0 on success, 1 for usage and config errors, 2 when input
//! records were malformed (reported per line and skipped where the command
//! can continue).

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{MatchTolerances, RoleConfig};
use crate::neural::{LMConfig, TrainConfig};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable paths, invalid config: exit 1.
    #[error("{0}")]
    Usage(String),
    /// Malformed input records: exit 2.
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Overlap-bypass minimum distance in angstroms; absent means off.
    pub bypass: Option<f64>,
    pub paths: PathsSection,
    pub model: LMConfig,
    pub train: TrainConfig,
    pub sample: SampleSection,
    pub sweep: SweepSection,
    pub augment: AugmentSection,
    pub eval: EvalSection,
    pub roles: Option<RoleConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data: Option<PathBuf>,
    pub val_data: Option<PathBuf>,
    pub tokens: Option<PathBuf>,
    pub gen: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub train_ref: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub detector: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub n: usize,
    pub temperature: f64,
    pub max_len: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        SampleSection { n: 100, temperature: 1.0, max_len: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub temperatures: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { temperatures: vec![0.5, 1.0, 1.5, 2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub translate: f64,
    pub rotate: f64,
    pub unchanged: f64,
}

impl Default for AugmentSection {
    fn default() -> Self {
        AugmentSection { translate: 0.25, rotate: 0.25, unchanged: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub tolerances: MatchTolerances,
    /// Overrides the calibrated (struct, comp) coverage cutoffs.
    pub cutoffs: Option<(f64, f64)>,
    pub emd_sample: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            tolerances: MatchTolerances::default(),
            cutoffs: None,
            emd_sample: 5000,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "catgen", version, about = "Catalyst structure generation toolkit")]
struct Cli {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// RNG seed (overrides config and CATGEN_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory for outputs and manifest.json.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct TrainFlags {
    /// Training dataset (JSONL structures, or labeled TSV for the detector).
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Validation dataset; optional.
    #[arg(long, value_name = "PATH")]
    val: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
}

#[derive(Debug, Args)]
struct GenFlags {
    /// Checkpoint directory of the trained language model.
    #[arg(long, value_name = "DIR")]
    checkpoint: Option<PathBuf>,
    /// Number of sequences to sample.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_len: Option<usize>,
    /// "bos" (default) or a JSONL dataset whose lattices become prompts.
    #[arg(long, value_name = "bos|PATH")]
    prompt: Option<String>,
    /// Skip atoms closer than this many angstroms to an accepted atom.
    #[arg(long, value_name = "DIST")]
    bypass: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalFlags {
    /// Generated token sequences, one line each.
    #[arg(long, value_name = "PATH")]
    gen: Option<PathBuf>,
    /// Ground-truth dataset (JSONL structures).
    #[arg(long, value_name = "PATH")]
    gt: Option<PathBuf>,
    /// Training dataset for the novelty metric.
    #[arg(long, value_name = "PATH")]
    train_ref: Option<PathBuf>,
    /// Detector checkpoint for catalyst validity.
    #[arg(long, value_name = "DIR")]
    detector: Option<PathBuf>,
    #[arg(long, value_name = "DIST")]
    bypass: Option<f64>,
    /// Max generated structures used for the property EMD; 0 keeps all.
    #[arg(long)]
    emd_sample: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepFlags {
    #[arg(long, value_name = "DIR")]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    gt: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    train_ref: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    detector: Option<PathBuf>,
    /// Comma-separated temperatures, e.g. "0.5,1.0,2.0".
    #[arg(long, value_name = "LIST")]
    temperatures: Option<String>,
    /// Samples per temperature.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, value_name = "DIST")]
    bypass: Option<f64>,
    #[arg(long)]
    emd_sample: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Tokenize a structure dataset into sequence lines.
    Encode {
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Parse token sequence lines back into structures.
    Decode {
        /// Token sequences, one line each.
        #[arg(long, value_name = "PATH")]
        tokens: Option<PathBuf>,
        #[arg(long, value_name = "DIST")]
        bypass: Option<f64>,
    },
    /// Train the language model from scratch.
    Train {
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Continue training from an existing checkpoint.
    Finetune {
        #[arg(long, value_name = "DIR")]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Train the anomaly detector on a labeled TSV.
    TrainDetector {
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Sample sequences from a checkpoint and decode them.
    Generate {
        #[command(flatten)]
        flags: GenFlags,
    },
    /// Generate and evaluate across a temperature sweep.
    Sweep {
        #[command(flatten)]
        flags: SweepFlags,
    },
    /// Score generated sequences against a ground-truth set.
    Evaluate {
        #[command(flatten)]
        flags: EvalFlags,
    },
    /// Build a half-corrupted labeled set for detector training.
    Corrupt {
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Apply random translations and rotations to a dataset.
    Augment {
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        #[arg(long)]
        translate: Option<f64>,
        #[arg(long)]
        rotate: Option<f64>,
        #[arg(long)]
        unchanged: Option<f64>,
    },
    /// Filter screening records by the 2e-ORR activity window.
    Screen {
        /// JSONL screening records with dG_OOH and dG_O.
        #[arg(long, value_name = "PATH")]
        records: Option<PathBuf>,
    },
}

pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match execute(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("completed with {n} error(s); see messages above");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit())
        }
    }
}

fn execute(cli: Cli) -> Result<usize, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let seed = resolve_seed(cli.seed, &cfg)?;
    cfg.seed = Some(seed);
    let out = cli
        .out
        .or_else(|| cfg.paths.out.clone())
        .unwrap_or_else(|| PathBuf::from("run"));
    cfg.paths.out = Some(out.clone());
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;

    match &cli.cmd {
        Cmd::Encode { data } => commands::encode(&mut cfg, data.clone(), seed, &out),
        Cmd::Decode { tokens, bypass } => {
            commands::decode(&mut cfg, tokens.clone(), *bypass, seed, &out)
        }
        Cmd::Train { flags } => commands::train(&mut cfg, flags, seed, &out),
        Cmd::Finetune { checkpoint, flags } => {
            commands::finetune(&mut cfg, checkpoint.clone(), flags, seed, &out)
        }
        Cmd::TrainDetector { flags } => commands::train_detector(&mut cfg, flags, seed, &out),
        Cmd::Generate { flags } => commands::generate(&mut cfg, flags, seed, &out),
        Cmd::Sweep { flags } => commands::sweep(&mut cfg, flags, seed, &out),
        Cmd::Evaluate { flags } => commands::evaluate(&mut cfg, flags, seed, &out),
        Cmd::Corrupt { data } => commands::corrupt(&mut cfg, data.clone(), seed, &out),
        Cmd::Augment { data, translate, rotate, unchanged } => commands::augment(
            &mut cfg,
            data.clone(),
            [*translate, *rotate, *unchanged],
            seed,
            &out,
        ),
        Cmd::Screen { records } => commands::screen(&mut cfg, records.clone(), seed, &out),
    }
}

fn load_config(path: &std::path::Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

/// Flag beats config beats CATGEN_SEED beats 0.
fn resolve_seed(flag: Option<u64>, cfg: &RunConfig) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = cfg.seed {
        return Ok(s);
    }
    match std::env::var("CATGEN_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("CATGEN_SEED {v:?} is not a valid u64"))),
        Err(_) => Ok(0),
    }
}
