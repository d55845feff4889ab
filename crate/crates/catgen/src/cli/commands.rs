//! Subcommand implementations.
//!
//! Every command returns the number of malformed input records it reported
//! and skipped; the caller turns a nonzero count into exit code 2. Errors
//! that stop a command early are `CliError::Usage` (bad flags, unreadable
//! paths, invalid config) or `CliError::Data` (content that parsed the shell
//! of a file but not its records).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{CliError, EvalFlags, GenFlags, RunConfig, SweepFlags, TrainFlags};
use crate::codec::{self, Bypass};
use crate::datagen::{self, AugmentSpec, LabeledSeq};
use crate::metrics::{self, EvalOptions, EvaluationReport, GenSample, Ratio, ScreeningRecord};
use crate::neural::{
    self, finetune_lm, init_detector, init_lm, load_detector, load_lm, sample, save_detector,
    save_lm, train_detector as fit_detector, train_lm, write_curves_csv, DetectorModel,
    LanguageModel, NeuralError, Prompt, SampleParams,
};
use crate::structio::{self, StructIoError, Structure};

/// Per-sample seed stride, the same odd constant `datagen::item_rng` uses.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    seed: u64,
    config_sha256: String,
    outputs: Vec<&'a str>,
}

fn write_manifest(
    out: &Path,
    command: &str,
    seed: u64,
    cfg: &RunConfig,
    outputs: &[&str],
) -> Result<(), CliError> {
    let resolved = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(resolved.as_bytes());
    let manifest = RunManifest {
        command,
        seed,
        config_sha256: format!("{digest:x}"),
        outputs: outputs.to_vec(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&out.join("manifest.json"), &(text + "\n"))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn write_lines(path: &Path, lines: &[String]) -> Result<(), CliError> {
    let mut text = lines.join("\n");
    if !lines.is_empty() {
        text.push('\n');
    }
    write_text(path, &text)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        w.write_all(b"\n")
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    w.flush()
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn require(path: &Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    path.clone()
        .ok_or_else(|| CliError::Usage(format!("missing {flag} (flag or config path)")))
}

fn read_structs(path: &Path) -> Result<Vec<Structure>, CliError> {
    structio::read_dataset(path).map_err(|e| match e {
        StructIoError::Io(err) => CliError::Usage(format!("{}: {err}", path.display())),
        other => CliError::Data(format!("{}: {other}", path.display())),
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn map_neural(e: NeuralError) -> CliError {
    match e {
        NeuralError::BadConfig(_)
        | NeuralError::ConfigMismatch(_)
        | NeuralError::BadPrompt(_)
        | NeuralError::SequenceTooLong { .. } => CliError::Usage(e.to_string()),
        NeuralError::NonFiniteLoss { .. } | NeuralError::EmptyTrainingSet => {
            CliError::Data(e.to_string())
        }
    }
}

fn map_checkpoint(e: neural::CheckpointError) -> CliError {
    match e {
        neural::CheckpointError::Io { .. } => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn map_datagen(e: datagen::DatagenError) -> CliError {
    match e {
        datagen::DatagenError::BadFractions(_) => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn bypass_of(min_dist: Option<f64>) -> Result<Bypass, CliError> {
    match min_dist {
        None => Ok(Bypass::Off),
        Some(d) if d.is_finite() && d > 0.0 => Ok(Bypass::On { min_dist: d }),
        Some(d) => Err(CliError::Usage(format!("bypass distance {d} must be positive"))),
    }
}

#[derive(Serialize)]
struct StatusLine {
    index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncated: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl StatusLine {
    fn ok(index: usize) -> StatusLine {
        StatusLine { index, id: None, ok: true, skipped: None, truncated: None, error: None }
    }

    fn err(index: usize, error: String) -> StatusLine {
        StatusLine { index, id: None, ok: false, skipped: None, truncated: None, error: Some(error) }
    }
}

pub fn encode(
    cfg: &mut RunConfig,
    data: Option<PathBuf>,
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    if data.is_some() {
        cfg.paths.data = data;
    }
    let path = require(&cfg.paths.data, "--data")?;
    let structs = read_structs(&path)?;
    let vocab = codec::build_vocab();

    let mut lines = Vec::new();
    let mut status = Vec::new();
    let mut errors = 0usize;
    for (i, s) in structs.iter().enumerate() {
        match codec::encode(s) {
            Ok(seq) => {
                lines.push(codec::seq_to_line(&vocab, &seq));
                status.push(StatusLine { id: Some(s.id.clone()), ..StatusLine::ok(i) });
            }
            Err(e) => {
                errors += 1;
                eprintln!("{}: structure {i} ({}): {e}", path.display(), s.id);
                status.push(StatusLine { id: Some(s.id.clone()), ..StatusLine::err(i, e.to_string()) });
            }
        }
    }

    write_lines(&out.join("tokens.txt"), &lines)?;
    write_jsonl(&out.join("status.jsonl"), &status)?;
    write_manifest(out, "encode", seed, cfg, &["tokens.txt", "status.jsonl"])?;
    println!("encoded {} of {} structures", lines.len(), structs.len());
    Ok(errors)
}

pub fn decode(
    cfg: &mut RunConfig,
    tokens: Option<PathBuf>,
    bypass: Option<f64>,
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    if tokens.is_some() {
        cfg.paths.tokens = tokens;
    }
    if bypass.is_some() {
        cfg.bypass = bypass;
    }
    let path = require(&cfg.paths.tokens, "--tokens")?;
    let text = read_text(&path)?;
    let bypass = bypass_of(cfg.bypass)?;
    let vocab = codec::build_vocab();

    let mut structs = Vec::new();
    let mut status = Vec::new();
    let mut errors = 0usize;
    let mut index = 0usize;
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let i = index;
        index += 1;
        let outcome = codec::line_to_seq(&vocab, line)
            .map_err(|e| e.to_string())
            .and_then(|seq| codec::decode(&seq, bypass).map_err(|e| e.to_string()));
        match outcome {
            Ok(mut d) => {
                d.structure.id = format!("g{i:05}");
                status.push(StatusLine {
                    id: Some(d.structure.id.clone()),
                    skipped: Some(d.skipped),
                    ..StatusLine::ok(i)
                });
                structs.push(d.structure);
            }
            Err(e) => {
                errors += 1;
                eprintln!("{}:{}: {e}", path.display(), ln + 1);
                status.push(StatusLine::err(i, e));
            }
        }
    }

    write_jsonl(&out.join("structures.jsonl"), &structs)?;
    write_jsonl(&out.join("status.jsonl"), &status)?;
    write_manifest(out, "decode", seed, cfg, &["structures.jsonl", "status.jsonl"])?;
    println!("decoded {} of {index} sequences", structs.len());
    Ok(errors)
}

fn encode_all(structs: &[Structure], path: &Path) -> Result<Vec<Vec<usize>>, CliError> {
    structs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            codec::encode(s).map_err(|e| {
                CliError::Data(format!("{}: structure {i} ({}): {e}", path.display(), s.id))
            })
        })
        .collect()
}

fn apply_train_flags(cfg: &mut RunConfig, flags: &TrainFlags) {
    if flags.data.is_some() {
        cfg.paths.data = flags.data.clone();
    }
    if flags.val.is_some() {
        cfg.paths.val_data = flags.val.clone();
    }
    if let Some(epochs) = flags.epochs {
        cfg.train.epochs = epochs;
    }
    if let Some(lr) = flags.lr {
        cfg.train.lr = lr;
    }
    if let Some(batch) = flags.batch {
        cfg.train.batch_size = batch;
    }
}

type TrainValSeqs = (Vec<Vec<usize>>, Vec<Vec<usize>>);

fn lm_training_inputs(cfg: &RunConfig) -> Result<TrainValSeqs, CliError> {
    let data = require(&cfg.paths.data, "--data")?;
    let train = encode_all(&read_structs(&data)?, &data)?;
    let val = match &cfg.paths.val_data {
        Some(p) => encode_all(&read_structs(p)?, p)?,
        None => Vec::new(),
    };
    Ok((train, val))
}

fn finish_training(
    cfg: &RunConfig,
    command: &str,
    seed: u64,
    out: &Path,
    result: Result<(LanguageModel, Vec<neural::CurvePoint>), NeuralError>,
) -> Result<usize, CliError> {
    let (mut model, curve) = result.map_err(map_neural)?;
    let ckpt = out.join("checkpoint");
    save_lm(&ckpt, &mut model).map_err(map_checkpoint)?;
    let curves = out.join("curves.csv");
    write_curves_csv(&curves, &curve)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", curves.display())))?;
    write_manifest(out, command, seed, cfg, &["checkpoint", "curves.csv"])?;
    if let Some(last) = curve.iter().rev().find(|p| p.split == "train") {
        println!("final train loss {:.6} after {} epochs", last.value, cfg.train.epochs);
    }
    Ok(0)
}

pub fn train(
    cfg: &mut RunConfig,
    flags: &TrainFlags,
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    apply_train_flags(cfg, flags);
    cfg.model.seed = seed;
    cfg.train.seed = seed;
    let (train_seqs, val_seqs) = lm_training_inputs(cfg)?;
    let model = init_lm(&cfg.model).map_err(map_neural)?;
    let result = train_lm(model, &train_seqs, &val_seqs, &cfg.train);
    finish_training(cfg, "train", seed, out, result)
}

pub fn finetune(
    cfg: &mut RunConfig,
    checkpoint: Option<PathBuf>,
    flags: &TrainFlags,
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    if checkpoint.is_some() {
        cfg.paths.checkpoint = checkpoint;
    }
    apply_train_flags(cfg, flags);
    cfg.train.seed = seed;
    let ckpt = require(&cfg.paths.checkpoint, "--checkpoint")?;
    let model = load_lm(&ckpt).map_err(map_checkpoint)?;
    cfg.model = model.cfg;
    let (train_seqs, val_seqs) = lm_training_inputs(cfg)?;
    let result = finetune_lm(&model, &train_seqs, &val_seqs, &cfg.train);
    finish_training(cfg, "finetune", seed, out, result)
}

fn read_labeled(path: &Path) -> Result<Vec<LabeledSeq>, CliError> {
    let text = read_text(path)?;
    let vocab = codec::build_vocab();
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l = datagen::line_to_labeled(&vocab, line)
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), ln + 1)))?;
        out.push(l);
    }
    Ok(out)
}

pub fn train_detector(
    cfg: &mut RunConfig,
    flags: &TrainFlags,
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    apply_train_flags(cfg, flags);
    cfg.model.seed = seed;
    cfg.train.seed = seed;
    let data = require(&cfg.paths.data, "--data")?;
    let train_set = read_labeled(&data)?;
    let val_set = match &cfg.paths.val_data {
        Some(p) => read_labeled(p)?,
        None => Vec::new(),
    };
    let model = init_detector(&cfg.model).map_err(map_neural)?;
    let (mut model, curve) =
        fit_detector(model, &train_set, &val_set, &cfg.train).map_err(map_neural)?;
    let ckpt = out.join("checkpoint");
    save_detector(&ckpt, &mut model).map_err(map_checkpoint)?;
    let curves = out.join("curves.csv");
    write_curves_csv(&curves, &curve)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", curves.display())))?;
    write_manifest(out, "train-detector", seed, cfg, &["checkpoint", "curves.csv"])?;
    if let Some(last) = curve.iter().rev().find(|p| p.split == "train") {
        println!("final train accuracy {:.6} after {} epochs", last.value, cfg.train.epochs);
    }
    Ok(0)
}

/// Samples `n` sequences; item `i` gets seed `base + i * SEED_STRIDE` so the
/// stream is stable under reordering and restarts.
fn sample_batch(
    model: &LanguageModel,
    prompts: &[Prompt],
    temperature: f64,
    max_len: usize,
    base_seed: u64,
) -> Result<Vec<neural::SampledSeq>, CliError> {
    prompts
        .iter()
        .enumerate()
        .map(|(i, prompt)| {
            let params = SampleParams {
                temperature,
                max_len,
                prompt: prompt.clone(),
                seed: base_seed.wrapping_add((i as u64).wrapping_mul(SEED_STRIDE)),
            };
            sample(model, &params).map_err(map_neural)
        })
        .collect()
}

fn resolve_prompts(prompt: Option<&str>, n: usize) -> Result<Vec<Prompt>, CliError> {
    match prompt {
        None | Some("bos") => Ok(vec![Prompt::BosOnly; n]),
        Some(path) => {
            let structs = read_structs(Path::new(path))?;
            if structs.is_empty() {
                return Err(CliError::Data(format!("{path}: no structures to prompt from")));
            }
            Ok(structs.iter().map(|s| Prompt::LatticePrompt(s.lattice)).collect())
        }
    }
}

pub fn generate(
    cfg: &mut RunConfig,
    flags: &GenFlags,
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    if flags.checkpoint.is_some() {
        cfg.paths.checkpoint = flags.checkpoint.clone();
    }
    if let Some(n) = flags.n {
        cfg.sample.n = n;
    }
    if let Some(t) = flags.temperature {
        cfg.sample.temperature = t;
    }
    if let Some(m) = flags.max_len {
        cfg.sample.max_len = m;
    }
    if flags.bypass.is_some() {
        cfg.bypass = flags.bypass;
    }
    let ckpt = require(&cfg.paths.checkpoint, "--checkpoint")?;
    let model = load_lm(&ckpt).map_err(map_checkpoint)?;
    let bypass = bypass_of(cfg.bypass)?;
    let prompts = resolve_prompts(flags.prompt.as_deref(), cfg.sample.n)?;
    let sampled = sample_batch(&model, &prompts, cfg.sample.temperature, cfg.sample.max_len, seed)?;

    let vocab = codec::build_vocab();
    let mut lines = Vec::new();
    let mut structs = Vec::new();
    let mut status = Vec::new();
    for (i, s) in sampled.iter().enumerate() {
        lines.push(codec::seq_to_line(&vocab, &s.tokens));
        match codec::decode(&s.tokens, bypass) {
            Ok(mut d) => {
                d.structure.id = format!("g{i:05}");
                status.push(StatusLine {
                    id: Some(d.structure.id.clone()),
                    skipped: Some(d.skipped),
                    truncated: Some(s.truncated),
                    ..StatusLine::ok(i)
                });
                structs.push(d.structure);
            }
            Err(e) => status.push(StatusLine {
                truncated: Some(s.truncated),
                ..StatusLine::err(i, e.to_string())
            }),
        }
    }

    write_lines(&out.join("tokens.txt"), &lines)?;
    write_jsonl(&out.join("structures.jsonl"), &structs)?;
    write_jsonl(&out.join("status.jsonl"), &status)?;
    write_manifest(
        out,
        "generate",
        seed,
        cfg,
        &["tokens.txt", "structures.jsonl", "status.jsonl"],
    )?;
    println!("sampled {} sequences, {} decoded", sampled.len(), structs.len());
    Ok(0)
}

fn load_detector_opt(path: &Option<PathBuf>) -> Result<Option<DetectorModel>, CliError> {
    match path {
        Some(p) => Ok(Some(load_detector(p).map_err(map_checkpoint)?)),
        None => Ok(None),
    }
}

fn eval_options(cfg: &RunConfig, seed: u64) -> EvalOptions {
    EvalOptions {
        tolerances: cfg.eval.tolerances,
        roles: cfg.roles.clone(),
        cutoffs: cfg.eval.cutoffs,
        emd_sample: cfg.eval.emd_sample,
        seed,
    }
}

pub fn evaluate(
    cfg: &mut RunConfig,
    flags: &EvalFlags,
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    if flags.gen.is_some() {
        cfg.paths.gen = flags.gen.clone();
    }
    if flags.gt.is_some() {
        cfg.paths.gt = flags.gt.clone();
    }
    if flags.train_ref.is_some() {
        cfg.paths.train_ref = flags.train_ref.clone();
    }
    if flags.detector.is_some() {
        cfg.paths.detector = flags.detector.clone();
    }
    if flags.bypass.is_some() {
        cfg.bypass = flags.bypass;
    }
    if let Some(n) = flags.emd_sample {
        cfg.eval.emd_sample = n;
    }

    let gen_path = require(&cfg.paths.gen, "--gen")?;
    let text = read_text(&gen_path)?;
    let bypass = bypass_of(cfg.bypass)?;
    let vocab = codec::build_vocab();
    let mut errors = 0usize;
    let mut samples = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match codec::line_to_seq(&vocab, line) {
            Ok(seq) => samples.push(GenSample::from_tokens(seq, bypass)),
            Err(e) => {
                errors += 1;
                eprintln!("{}:{}: {e}", gen_path.display(), ln + 1);
                samples.push(GenSample::from_tokens(Vec::new(), bypass));
            }
        }
    }

    let gt = read_structs(&require(&cfg.paths.gt, "--gt")?)?;
    let train_ref = match &cfg.paths.train_ref {
        Some(p) => Some(read_structs(p)?),
        None => None,
    };
    let detector = load_detector_opt(&cfg.paths.detector)?;
    let opts = eval_options(cfg, seed);
    let report = metrics::evaluate(&samples, &gt, train_ref.as_deref(), detector.as_ref(), &opts)
        .map_err(|e| CliError::Data(e.to_string()))?;

    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&out.join("report.json"), &(json + "\n"))?;
    let table = metrics::render_table(&report);
    write_text(&out.join("table.txt"), &table)?;
    write_manifest(out, "evaluate", seed, cfg, &["report.json", "table.txt"])?;
    print!("{table}");
    Ok(errors)
}

fn ratio_cell(r: Option<&Ratio>) -> String {
    value_cell(r.map(|r| r.value))
}

fn value_cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn sweep_row(temperature: f64, report: Option<&EvaluationReport>) -> Vec<String> {
    let mut row = vec![format!("{temperature}")];
    match report {
        Some(r) => {
            row.push(ratio_cell(Some(&r.validity.generation)));
            row.push(ratio_cell(r.validity.catalyst.as_ref()));
            row.push(ratio_cell(r.validity.composition.as_ref()));
            row.push(ratio_cell(r.validity.adsorption.as_ref()));
            row.push(value_cell(Some(r.coverage.recall)));
            row.push(value_cell(Some(r.coverage.precision)));
            row.push(value_cell(Some(r.diversity.uniqueness)));
            row.push(value_cell(r.diversity.novelty));
        }
        None => row.extend(std::iter::repeat_n(String::new(), 8)),
    }
    row
}

const SWEEP_HEADER: [&str; 9] = [
    "temperature",
    "generation",
    "catalytic",
    "composition",
    "adsorption",
    "recall",
    "precision",
    "uniqueness",
    "novelty",
];

fn render_sweep_text(rows: &[Vec<String>]) -> String {
    let mut widths = SWEEP_HEADER.map(str::len);
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut text = String::new();
    let fmt_row = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths.iter())
            .map(|(c, w)| format!("{c:>width$}", width = *w))
            .collect();
        padded.join("  ")
    };
    let header: Vec<String> = SWEEP_HEADER.iter().map(|h| h.to_string()).collect();
    text.push_str(&fmt_row(&header));
    text.push('\n');
    for row in rows {
        text.push_str(&fmt_row(row));
        text.push('\n');
    }
    text
}

fn parse_temperatures(list: &str) -> Result<Vec<f64>, CliError> {
    let temps: Result<Vec<f64>, _> = list.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let temps =
        temps.map_err(|e| CliError::Usage(format!("bad temperature list {list:?}: {e}")))?;
    if temps.is_empty() || temps.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(CliError::Usage(format!("bad temperature list {list:?}")));
    }
    Ok(temps)
}

pub fn sweep(
    cfg: &mut RunConfig,
    flags: &SweepFlags,
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    if flags.checkpoint.is_some() {
        cfg.paths.checkpoint = flags.checkpoint.clone();
    }
    if flags.gt.is_some() {
        cfg.paths.gt = flags.gt.clone();
    }
    if flags.train_ref.is_some() {
        cfg.paths.train_ref = flags.train_ref.clone();
    }
    if flags.detector.is_some() {
        cfg.paths.detector = flags.detector.clone();
    }
    if let Some(n) = flags.n {
        cfg.sample.n = n;
    }
    if let Some(m) = flags.max_len {
        cfg.sample.max_len = m;
    }
    if flags.bypass.is_some() {
        cfg.bypass = flags.bypass;
    }
    if let Some(n) = flags.emd_sample {
        cfg.eval.emd_sample = n;
    }
    if let Some(list) = &flags.temperatures {
        cfg.sweep.temperatures = parse_temperatures(list)?;
    }

    let model = load_lm(&require(&cfg.paths.checkpoint, "--checkpoint")?).map_err(map_checkpoint)?;
    let gt = read_structs(&require(&cfg.paths.gt, "--gt")?)?;
    let train_ref = match &cfg.paths.train_ref {
        Some(p) => Some(read_structs(p)?),
        None => None,
    };
    let detector = load_detector_opt(&cfg.paths.detector)?;
    let bypass = bypass_of(cfg.bypass)?;
    let opts = eval_options(cfg, seed);
    let prompts = vec![Prompt::BosOnly; cfg.sample.n];

    let mut errors = 0usize;
    let mut rows = Vec::new();
    let mut report_files = Vec::new();
    let temps = cfg.sweep.temperatures.clone();
    for (k, &tau) in temps.iter().enumerate() {
        // Every temperature reuses the same base seed, so rows differ only
        // in temperature.
        let sampled = sample_batch(&model, &prompts, tau, cfg.sample.max_len, seed)?;
        let samples: Vec<GenSample> = sampled
            .into_iter()
            .map(|s| GenSample::from_tokens(s.tokens, bypass))
            .collect();
        match metrics::evaluate(&samples, &gt, train_ref.as_deref(), detector.as_ref(), &opts) {
            Ok(report) => {
                let name = format!("report_{k}.json");
                let json = serde_json::to_string_pretty(&report).expect("report serializes");
                write_text(&out.join(&name), &(json + "\n"))?;
                report_files.push(name);
                rows.push(sweep_row(tau, Some(&report)));
            }
            Err(e) => {
                errors += 1;
                eprintln!("temperature {tau}: {e}");
                rows.push(sweep_row(tau, None));
            }
        }
    }

    let csv: Vec<String> = std::iter::once(SWEEP_HEADER.join(","))
        .chain(rows.iter().map(|r| r.join(",")))
        .collect();
    write_lines(&out.join("sweep.csv"), &csv)?;
    let text = render_sweep_text(&rows);
    write_text(&out.join("sweep.txt"), &text)?;
    let mut outputs = vec!["sweep.csv", "sweep.txt"];
    outputs.extend(report_files.iter().map(String::as_str));
    write_manifest(out, "sweep", seed, cfg, &outputs)?;
    print!("{text}");
    Ok(errors)
}

pub fn corrupt(
    cfg: &mut RunConfig,
    data: Option<PathBuf>,
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    if data.is_some() {
        cfg.paths.data = data;
    }
    let path = require(&cfg.paths.data, "--data")?;
    let structs = read_structs(&path)?;
    let labeled = datagen::build_half_corrupted(&structs, seed).map_err(map_datagen)?;
    let vocab = codec::build_vocab();
    let lines: Vec<String> = labeled.iter().map(|l| datagen::labeled_to_line(&vocab, l)).collect();
    write_lines(&out.join("labeled.tsv"), &lines)?;
    write_manifest(out, "corrupt", seed, cfg, &["labeled.tsv"])?;
    let clean = labeled.iter().filter(|l| l.label == 1).count();
    println!("labeled {} sequences ({clean} clean, {} corrupted)", labeled.len(), labeled.len() - clean);
    Ok(0)
}

pub fn augment(
    cfg: &mut RunConfig,
    data: Option<PathBuf>,
    fractions: [Option<f64>; 3],
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    if data.is_some() {
        cfg.paths.data = data;
    }
    if let Some(t) = fractions[0] {
        cfg.augment.translate = t;
    }
    if let Some(r) = fractions[1] {
        cfg.augment.rotate = r;
    }
    if let Some(u) = fractions[2] {
        cfg.augment.unchanged = u;
    }
    let path = require(&cfg.paths.data, "--data")?;
    let structs = read_structs(&path)?;
    let spec = AugmentSpec {
        translate: cfg.augment.translate,
        rotate: cfg.augment.rotate,
        unchanged: cfg.augment.unchanged,
        seed,
    };
    let augmented = datagen::build_augmented(&structs, &spec).map_err(map_datagen)?;
    write_jsonl(&out.join("augmented.jsonl"), &augmented)?;
    write_manifest(out, "augment", seed, cfg, &["augmented.jsonl"])?;
    println!("augmented {} structures", augmented.len());
    Ok(0)
}

pub fn screen(
    cfg: &mut RunConfig,
    records: Option<PathBuf>,
    seed: u64,
    out: &Path,
) -> Result<usize, CliError> {
    if records.is_some() {
        cfg.paths.records = records;
    }
    let path = require(&cfg.paths.records, "--records")?;
    let text = read_text(&path)?;
    let mut errors = 0usize;
    let mut parsed: Vec<ScreeningRecord> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => parsed.push(r),
            Err(e) => {
                errors += 1;
                eprintln!("{}:{}: {e}", path.display(), ln + 1);
            }
        }
    }
    let total = parsed.len();
    let screening = metrics::screen(&parsed);
    write_jsonl(&out.join("passed.jsonl"), &screening.passed)?;
    write_jsonl(&out.join("near_optimal.jsonl"), &screening.near_optimal)?;
    write_manifest(out, "screen", seed, cfg, &["passed.jsonl", "near_optimal.jsonl"])?;
    println!(
        "{} of {total} records passed, {} near-optimal",
        screening.passed.len(),
        screening.near_optimal.len()
    );
    Ok(errors)
}
