//! `chunkwise`: generate data, chunk rationales, build examples, train, evaluate and report.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use chunkwise::chunking::{
    average_chunk, granular_chunk, load_plans, save_plans, search_chunk, ChunkPlan, Granularity, ModelScorer,
    SearchConfig,
};
use chunkwise::corpus::{generate_one, load_dataset_with_header, save_dataset, Sample};
use chunkwise::databuild::{
    build_baseline_example, build_cwt_examples, build_skipall_example, build_stt_examples, build_weighted_example,
    generate_skip_labels, save_examples, SkipLabel,
};
use chunkwise::eval::{
    confidence_report, evaluate, render_summary, save_trace, speedup_ratio, summary_csv, wall_speedup,
    Confidence, ConfidenceLayout, DecodeMode, EvalReport, SummaryRow,
};
use chunkwise::model::checkpoint::{load_checkpoint, save_model};
use chunkwise::model::Transformer;
use chunkwise::store::{check_fresh, file_sha256, read_jsonl, read_lines, write_jsonl, Provenance};
use chunkwise::train::{run, run_stt, save_run_record, Regime, RunConfig};

use config::{Overrides, PipelineConfig};

#[derive(Parser, Debug)]
#[command(name = "chunkwise", version, about = "Chunk-wise chain-of-thought distillation pipeline")]
struct Cli {
    /// TOML configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of both data generation and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training regime (baseline, cwt_ac, cwt_sbc, stt, skipall, sent_wise, step_wise, weighted).
    #[arg(long, global = true, value_parser = parse_regime)]
    regime: Option<Regime>,
    /// Boundary-move threshold of the chunk search (`inf` disables moves).
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Chunk count M.
    #[arg(long = "chunks", global = true)]
    chunks: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (default: a directory under the config root named by the data config hash).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the train and dev datasets.
    Gen,
    /// Chunk every training rationale.
    Chunk {
        #[arg(long, value_enum, default_value = "ac")]
        mode: ChunkMode,
        /// Scorer model for `sbc` (default: the untrained model of the seed).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Build training examples.
    Build {
        #[arg(long, value_enum)]
        kind: BuildKind,
        /// Chunk plans (default: plans-ac.jsonl).
        #[arg(long)]
        plans: Option<PathBuf>,
        /// Label model for `stt` (default: the cwt_sbc run's best checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train a regime and write its run log and checkpoints.
    Train {
        /// Chunk-wise run directory an `stt` run starts from (default: the matching cwt_sbc run).
        #[arg(long)]
        source: Option<PathBuf>,
    },
    /// Evaluate a trained run on the dev set.
    Eval {
        /// Decoding protocol (default: the regime's own).
        #[arg(long, value_enum)]
        mode: Option<EvalMode>,
        /// Evaluation dataset (default: dev.jsonl).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Record wall-clock times (makes outputs run-dependent).
        #[arg(long)]
        timing: bool,
        /// Also measure core/other token confidence.
        #[arg(long)]
        confidence: bool,
    },
    /// Summarize every evaluated run of the dataset.
    Report,
    /// Check every recorded input hash under the output directory.
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ChunkMode {
    Ac,
    Sbc,
    Sentence,
    Step,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BuildKind {
    Baseline,
    Cwt,
    Stt,
    Skipall,
    Weighted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Full,
    Staged,
    Skip,
    Open,
}

fn parse_regime(s: &str) -> std::result::Result<Regime, String> {
    s.parse().map_err(|e: chunkwise::Error| e.to_string())
}

/// The machine-readable error kind of a failure.
fn error_kind(e: &anyhow::Error) -> &'static str {
    use chunkwise::Error as E;
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<E>() {
            return match err {
                E::Config(_) => "config",
                E::EmptyRationale => "empty_rationale",
                E::Parse { .. } => "parse",
                E::Contract(_) => "contract",
                E::ContextOverflow { .. } => "context_overflow",
                E::NonFinite { .. } => "non_finite",
                E::Diverged { .. } => "diverged",
                E::Scorer { .. } => "scorer",
                E::Checkpoint(_) => "checkpoint",
                E::ModeMismatch(_) => "mode_mismatch",
                E::Exists(_) => "exists",
                E::Provenance { .. } => "provenance",
                E::Teacher(_) => "teacher",
                E::Io { .. } => "io",
                E::Json(_) => "json",
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return "config";
        }
    }
    "error"
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run_cli(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.chain().map(|c| c.to_string()).collect::<Vec<_>>().join(": ");
            eprintln!(
                "{}",
                serde_json::json!({ "error": error_kind(&e), "message": message.replace('\n', " ") })
            );
            ExitCode::FAILURE
        }
    }
}

struct Ctx {
    cfg: PipelineConfig,
    dir: PathBuf,
    force: bool,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Provenance naming each input by its path relative to the output directory.
    fn provenance(&self, artifact: &str, inputs: &[&Path]) -> Result<Provenance> {
        let mut map = BTreeMap::new();
        for p in inputs {
            let rel = p.strip_prefix(&self.dir).unwrap_or(p);
            map.insert(rel.to_string_lossy().into_owned(), file_sha256(p)?);
        }
        Ok(Provenance {
            artifact: artifact.to_string(),
            inputs: map,
            config: self.cfg.hash(),
        })
    }

    fn fresh(&self, outputs: &[&Path]) -> Result<()> {
        for p in outputs {
            check_fresh(p, self.force)?;
        }
        Ok(())
    }

    fn require(&self, p: &Path) -> Result<()> {
        if !p.exists() {
            bail!(chunkwise::Error::Config(format!("missing input {}", p.display())));
        }
        Ok(())
    }

    fn load(&self, name: &str) -> Result<(PathBuf, Vec<Sample>)> {
        let p = self.path(name);
        self.require(&p)?;
        let (_, s) = load_dataset_with_header(&p)?;
        Ok((p, s))
    }

    fn run_dir(&self, run: &RunConfig) -> PathBuf {
        self.dir.join(PipelineConfig::run_dir_name(run))
    }

    /// The run config of `regime` with everything else unchanged.
    fn run_config_for(&self, regime: Regime) -> RunConfig {
        let mut r = self.cfg.run.clone();
        r.regime = regime;
        let needs = matches!(regime, Regime::CwtSbc | Regime::Stt);
        r.search = match (r.search, needs) {
            (Some(s), true) => Some(s),
            (None, true) => Some(SearchConfig::new(r.chunks)),
            (_, false) => None,
        };
        r
    }
}

fn run_cli(cli: &Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    let overrides = Overrides {
        seed: cli.seed,
        regime: cli.regime,
        eta: cli.eta,
        chunks: cli.chunks,
    };
    let cfg = PipelineConfig::load(cli.config.as_deref(), &overrides)?;
    let dir = cfg.data_dir(cli.out.as_deref());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let ctx = Ctx {
        cfg,
        dir,
        force: cli.force,
    };
    match &cli.command {
        Command::Gen => cmd_gen(&ctx),
        Command::Chunk { mode, checkpoint } => cmd_chunk(&ctx, *mode, checkpoint.as_deref(), cli.eta),
        Command::Build {
            kind,
            plans,
            checkpoint,
        } => cmd_build(&ctx, *kind, plans.as_deref(), checkpoint.as_deref()),
        Command::Train { source } => cmd_train(&ctx, source.as_deref()),
        Command::Eval {
            mode,
            dataset,
            timing,
            confidence,
        } => cmd_eval(&ctx, *mode, dataset.as_deref(), *timing, *confidence),
        Command::Report => cmd_report(&ctx),
        Command::Verify => cmd_verify(&ctx),
    }
}

fn cmd_gen(ctx: &Ctx) -> Result<()> {
    let (train_p, dev_p, conf_p) = (ctx.path("train.jsonl"), ctx.path("dev.jsonl"), ctx.path("config.toml"));
    ctx.fresh(&[&train_p, &dev_p])?;
    let c = &ctx.cfg;
    let all: Vec<Sample> = (0..c.train_size + c.dev_size)
        .into_par_iter()
        .map(|i| generate_one(&c.task, i))
        .collect::<chunkwise::Result<_>>()?;
    let (train, dev) = all.split_at(c.train_size);
    fs::write(&conf_p, toml::to_string_pretty(c)?).with_context(|| format!("writing {}", conf_p.display()))?;
    save_dataset(train, &train_p, Some(&ctx.provenance("train", &[])?))?;
    save_dataset(dev, &dev_p, Some(&ctx.provenance("dev", &[])?))?;
    println!("{} train / {} dev samples -> {}", train.len(), dev.len(), ctx.dir.display());
    Ok(())
}

fn scorer_model(ctx: &Ctx, checkpoint: Option<&Path>) -> Result<(Transformer<f32>, Vec<PathBuf>)> {
    match checkpoint {
        Some(p) => Ok((load_checkpoint(p)?.1, vec![p.to_path_buf()])),
        None => Ok((Transformer::init(ctx.cfg.run.model, ctx.cfg.run.train.seed)?, Vec::new())),
    }
}

fn cmd_chunk(ctx: &Ctx, mode: ChunkMode, checkpoint: Option<&Path>, eta: Option<f64>) -> Result<()> {
    let name = format!("plans-{}.jsonl", format!("{mode:?}").to_lowercase());
    let out = ctx.path(&name);
    ctx.fresh(&[&out])?;
    let (train_p, train) = ctx.load("train.jsonl")?;
    let m = ctx.cfg.run.chunks;
    let ac = || -> Result<Vec<ChunkPlan>> {
        Ok(train
            .iter()
            .map(|s| average_chunk(&s.id, s.steps.len(), m))
            .collect::<chunkwise::Result<_>>()?)
    };
    let mut inputs = vec![train_p];
    let plans = match mode {
        ChunkMode::Ac => ac()?,
        ChunkMode::Sentence | ChunkMode::Step => {
            let g = if mode == ChunkMode::Sentence {
                Granularity::Sentence
            } else {
                Granularity::Step
            };
            train.iter().map(|s| granular_chunk(s, g)).collect::<chunkwise::Result<_>>()?
        }
        ChunkMode::Sbc => {
            let mut search = ctx.cfg.run.search.unwrap_or_else(|| SearchConfig::new(m));
            search.chunks = m;
            if let Some(e) = eta {
                search.eta = e;
            }
            let (model, extra) = scorer_model(ctx, checkpoint)?;
            inputs.extend(extra);
            let scorer = ModelScorer::new(&model);
            let start = ac()?;
            train
                .par_iter()
                .zip(&start)
                .map(|(s, p)| search_chunk(p, s, &scorer, &search))
                .collect::<chunkwise::Result<_>>()?
        }
    };
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    save_plans(&plans, 0, &out, Some(&ctx.provenance("plans", &refs)?))?;
    println!("{} plans -> {}", plans.len(), out.display());
    Ok(())
}

fn cmd_build(ctx: &Ctx, kind: BuildKind, plans: Option<&Path>, checkpoint: Option<&Path>) -> Result<()> {
    let out = ctx.path(&format!("examples-{}.jsonl", format!("{kind:?}").to_lowercase()));
    ctx.fresh(&[&out])?;
    let (train_p, train) = ctx.load("train.jsonl")?;
    let mut inputs = vec![train_p];
    let load_plans_for = |inputs: &mut Vec<PathBuf>| -> Result<Vec<ChunkPlan>> {
        let p = plans.map(Path::to_path_buf).unwrap_or_else(|| ctx.path("plans-ac.jsonl"));
        ctx.require(&p)?;
        let (_, v) = load_plans(&p)?;
        if v.len() != train.len() || v.iter().zip(&train).any(|(a, s)| a.sample_id != s.id) {
            bail!(chunkwise::Error::Contract(format!("{} does not match the training set", p.display())));
        }
        inputs.push(p);
        Ok(v)
    };
    let per_sample: Vec<Vec<_>> = match kind {
        BuildKind::Baseline => train.iter().map(|s| Ok(vec![build_baseline_example(s)?])).collect::<Result<_>>()?,
        BuildKind::Weighted => train
            .iter()
            .map(|s| Ok(vec![build_weighted_example(s, ctx.cfg.run.core_weight)?]))
            .collect::<Result<_>>()?,
        BuildKind::Skipall => train.iter().map(|s| Ok(vec![build_skipall_example(s)?])).collect::<Result<_>>()?,
        BuildKind::Cwt => {
            let plans = load_plans_for(&mut inputs)?;
            train
                .iter()
                .zip(&plans)
                .map(|(s, p)| Ok(build_cwt_examples(s, p)?))
                .collect::<Result<_>>()?
        }
        BuildKind::Stt => {
            let plans = load_plans_for(&mut inputs)?;
            let ck = match checkpoint {
                Some(p) => p.to_path_buf(),
                None => ctx.run_dir(&ctx.run_config_for(Regime::CwtSbc)).join("best.ckpt"),
            };
            ctx.require(&ck)?;
            let (_, model) = load_checkpoint(&ck)?;
            inputs.push(ck);
            let mode = ctx.cfg.run.label_mode;
            let labels: Vec<SkipLabel> = train
                .par_iter()
                .zip(&plans)
                .map(|(s, p)| generate_skip_labels(&model, s, p, mode, 0))
                .collect::<chunkwise::Result<_>>()?;
            train
                .iter()
                .zip(&plans)
                .zip(&labels)
                .map(|((s, p), l)| Ok(build_stt_examples(s, p, l)?))
                .collect::<Result<_>>()?
        }
    };
    let examples: Vec<_> = per_sample.into_iter().flatten().collect();
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    save_examples(&examples, &out, Some(&ctx.provenance("examples", &refs)?))?;
    println!("{} examples -> {}", examples.len(), out.display());
    Ok(())
}

fn cmd_train(ctx: &Ctx, source: Option<&Path>) -> Result<()> {
    let rc = &ctx.cfg.run;
    let dir = ctx.run_dir(rc);
    fs::create_dir_all(&dir)?;
    let (log_p, best_p, last_p) = (dir.join("run.jsonl"), dir.join("best.ckpt"), dir.join("last.ckpt"));
    ctx.fresh(&[&log_p, &best_p, &last_p])?;
    let (train_p, train) = ctx.load("train.jsonl")?;
    let (dev_p, dev) = ctx.load("dev.jsonl")?;
    let mut inputs = vec![train_p, dev_p];
    let outcome = if rc.regime == Regime::Stt {
        let src = match source {
            Some(p) => p.to_path_buf(),
            None => ctx.run_dir(&ctx.run_config_for(Regime::CwtSbc)),
        };
        let (ck, plans_p) = (src.join("best.ckpt"), src.join("plans.jsonl"));
        ctx.require(&ck)?;
        ctx.require(&plans_p)?;
        let (_, model) = load_checkpoint(&ck)?;
        let (_, plans) = load_plans(&plans_p)?;
        inputs.push(ck);
        inputs.push(plans_p);
        run_stt(rc, &train, &dev, &model, plans)?
    } else {
        run(rc, &train, &dev)?
    };
    fs::write(dir.join("config.toml"), toml::to_string_pretty(&ctx.cfg)?)?;
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let prov = ctx.provenance("run", &refs)?;
    if let Some(plans) = &outcome.plans {
        save_plans(plans, outcome.record.epochs.len(), &dir.join("plans.jsonl"), Some(&prov))?;
    }
    if let Some(labels) = &outcome.labels {
        write_jsonl(&dir.join("labels.jsonl"), labels, Some(&prov))?;
    }
    save_model(&outcome.best, None, &best_p, Some(&prov))?;
    save_model(&outcome.last.model, Some(&outcome.last.adam), &last_p, Some(&prov))?;
    save_run_record(&outcome.record, &log_p, Some(&prov))?;
    println!(
        "{}: {} epochs, best dev accuracy {:.4} at epoch {} -> {}",
        rc.regime,
        outcome.record.epochs.len(),
        outcome.record.best_accuracy,
        outcome.record.best_epoch,
        dir.display()
    );
    Ok(())
}

/// Persisted evaluation summary of one run under one protocol.
#[derive(Debug, Serialize, Deserialize)]
struct ReportFile {
    provenance: Provenance,
    regime: Regime,
    report: EvalReport,
}

fn eval_mode(rc: &RunConfig, m: EvalMode) -> DecodeMode {
    match m {
        EvalMode::Full => DecodeMode::Full,
        EvalMode::Staged => DecodeMode::Staged { chunks: rc.chunks },
        EvalMode::Skip => DecodeMode::Skip,
        EvalMode::Open => match rc.decode_mode() {
            open @ DecodeMode::Open { .. } => open,
            _ => DecodeMode::Open {
                prefix: chunkwise::databuild::StagePrefix::Untagged,
            },
        },
    }
}

fn mode_name(m: DecodeMode) -> &'static str {
    match m {
        DecodeMode::Full => "full",
        DecodeMode::Staged { .. } => "staged",
        DecodeMode::Open { .. } => "open",
        DecodeMode::Skip => "skip",
    }
}

fn cmd_eval(ctx: &Ctx, mode: Option<EvalMode>, dataset: Option<&Path>, timing: bool, confidence: bool) -> Result<()> {
    let rc = &ctx.cfg.run;
    let mode = mode.map_or_else(|| rc.decode_mode(), |m| eval_mode(rc, m));
    rc.check_mode(mode)?;
    let dir = ctx.run_dir(rc);
    let ck = dir.join("best.ckpt");
    ctx.require(&ck)?;
    let (trace_p, report_p) = (
        dir.join(format!("trace-{}.jsonl", mode_name(mode))),
        dir.join(format!("report-{}.json", mode_name(mode))),
    );
    ctx.fresh(&[&trace_p, &report_p])?;
    let data_p = dataset.map(Path::to_path_buf).unwrap_or_else(|| ctx.path("dev.jsonl"));
    ctx.require(&data_p)?;
    let (_, samples) = load_dataset_with_header(&data_p)?;
    let (_, model) = load_checkpoint(&ck)?;
    let mut report = evaluate(&model, &samples, mode)?;
    if !timing {
        let mut records = std::mem::take(&mut report.records);
        records.iter_mut().for_each(|r| r.wall_ms = 0.0);
        report = EvalReport::from_records(mode, records);
    }
    if confidence {
        report.confidence = Some(measure_confidence(&model, &samples, rc)?);
    }
    let prov = ctx.provenance("eval", &[&ck, &data_p])?;
    save_trace(&report, &trace_p, Some(&prov))?;
    let file = ReportFile {
        provenance: prov,
        regime: rc.regime,
        report,
    };
    fs::write(&report_p, serde_json::to_string_pretty(&file)? + "\n")?;
    println!(
        "{} [{}]: accuracy {:.4}, mean tokens {:.1}, cap rate {:.3}",
        rc.regime,
        mode_name(mode),
        file.report.accuracy,
        file.report.mean_tokens,
        file.report.cap_rate
    );
    Ok(())
}

fn measure_confidence(model: &Transformer<f32>, samples: &[Sample], rc: &RunConfig) -> Result<Confidence> {
    Ok(match rc.regime {
        Regime::CwtAc | Regime::CwtSbc | Regime::Stt => {
            let plans: Vec<ChunkPlan> = samples
                .iter()
                .map(|s| average_chunk(&s.id, s.steps.len(), rc.chunks))
                .collect::<chunkwise::Result<_>>()?;
            confidence_report(model, samples, ConfidenceLayout::Staged(&plans))?
        }
        _ => confidence_report(model, samples, ConfidenceLayout::Full)?,
    })
}

fn cmd_report(ctx: &Ctx) -> Result<()> {
    let (txt_p, csv_p) = (ctx.path("summary.txt"), ctx.path("summary.csv"));
    ctx.fresh(&[&txt_p, &csv_p])?;
    let mut files = Vec::new();
    for entry in fs::read_dir(&ctx.dir)? {
        let sub = entry?.path();
        if !sub.is_dir() {
            continue;
        }
        for f in fs::read_dir(&sub)? {
            let p = f?.path();
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.starts_with("report-") && name.ends_with(".json") {
                files.push(p);
            }
        }
    }
    files.sort();
    if files.is_empty() {
        bail!(chunkwise::Error::Config(format!("no evaluation reports under {}", ctx.dir.display())));
    }
    let mut loaded = Vec::new();
    for p in &files {
        let text = fs::read_to_string(p)?;
        let f: ReportFile = serde_json::from_str(&text).with_context(|| format!("reading {}", p.display()))?;
        let (_, records) = read_jsonl(&p.with_file_name(
            p.file_name().unwrap().to_string_lossy().replace("report-", "trace-").replace(".json", ".jsonl"),
        ))?;
        let mut report = f.report;
        report.records = records;
        loaded.push((p.clone(), f.regime, report));
    }
    let reference = loaded
        .iter()
        .find(|(_, r, rep)| *r == Regime::CwtSbc && matches!(rep.mode, DecodeMode::Staged { .. }))
        .map(|(_, _, rep)| rep.clone());
    let mut rows = Vec::new();
    for (_, regime, report) in &loaded {
        let mut row = SummaryRow::from_reports(&format!("{regime}/{}", mode_name(report.mode)), &[report]);
        if let Some(r) = &reference {
            if report.samples == r.samples {
                row.speedup = Some(speedup_ratio(r, report)?);
                log::info!("{regime}: wall speedup {:.2}", wall_speedup(r, report));
            }
        }
        rows.push(row);
    }
    let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    let prov = serde_json::to_string(&ctx.provenance("summary", &refs)?)?;
    let table = render_summary(&rows);
    fs::write(&txt_p, format!("# provenance {prov}\n{table}"))?;
    fs::write(&csv_p, format!("# provenance {prov}\n{}", summary_csv(&rows)))?;
    print!("{table}");
    Ok(())
}

/// Extracts the provenance record embedded in an artifact, if any.
fn embedded_provenance(p: &Path) -> Result<Option<Provenance>> {
    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if name.ends_with(".jsonl") {
        return Ok(read_lines(p)?.0);
    }
    if name.ends_with(".ckpt") {
        return Ok(load_checkpoint(p)?.0.provenance);
    }
    if name.starts_with("report-") && name.ends_with(".json") {
        let f: ReportFile = serde_json::from_str(&fs::read_to_string(p)?)?;
        return Ok(Some(f.provenance));
    }
    if name.starts_with("summary.") {
        let text = fs::read_to_string(p)?;
        let first = text.lines().next().unwrap_or("");
        return match first.strip_prefix("# provenance ") {
            Some(j) => Ok(Some(serde_json::from_str(j)?)),
            None => Ok(None),
        };
    }
    Ok(None)
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn cmd_verify(ctx: &Ctx) -> Result<()> {
    let mut files = Vec::new();
    walk(&ctx.dir, &mut files)?;
    files.sort();
    let mut checked = 0;
    for p in &files {
        let Some(prov) = embedded_provenance(p)? else {
            continue;
        };
        for (input, hash) in &prov.inputs {
            let actual = file_sha256(&ctx.dir.join(input))
                .map_err(|e| anyhow!(chunkwise::Error::Provenance { path: p.clone(), message: e.to_string() }))?;
            if &actual != hash {
                bail!(chunkwise::Error::Provenance {
                    path: p.clone(),
                    message: format!("input {input} changed (recorded {hash}, found {actual})"),
                });
            }
        }
        checked += 1;
    }
    println!("{checked} artifacts verified under {}", ctx.dir.display());
    Ok(())
}
