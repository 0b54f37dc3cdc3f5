//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-4 and 10 are exact and decide the exit code. The desk-scale
//! trend criteria 5-9 are reported but never fail the process; they train
//! dozens of models and only run when `CHUNKWISE_TRENDS=1`
//! (`CHUNKWISE_TREND_EPOCHS` overrides the per-run epoch count).

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chunkwise::chunking::{
    average_chunk, granular_chunk, search_chunk, ChunkPlan, Granularity, Scorer, SearchConfig, Unit,
};
use chunkwise::corpus::{generate, split_rationale, Sample, TaskConfig, TaskKind};
use chunkwise::databuild::{
    build_baseline_example, build_cwt_examples, build_stt_examples, build_weighted_example, token_total, Decision,
    LabelMode, SkipLabel,
};
use chunkwise::eval::{confidence_report, speedup_ratio, ConfidenceLayout};
use chunkwise::model::checkpoint::param_hash;
use chunkwise::model::transformer::TargetSpan;
use chunkwise::model::{span_loss, LanguageModel, ModelConfig, Student, TokenId, TrainConfig, Transformer, Vocabulary};
use chunkwise::train::{average_plans, run, run_stt, Regime, RunConfig, RunOutcome};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- criterion 1

const WORDS: &[&str] = &["alpha", "beta", "gamma", "delta", "x=3", "so", "then", "7+5", "done", "Bo", "it's"];

fn random_sample(rng: &mut ChaCha8Rng, id: usize, max_steps: usize) -> Sample {
    let n = rng.random_range(1..=max_steps);
    let lines: Vec<String> = (0..n)
        .map(|_| {
            let words = rng.random_range(1..6);
            let mut s = String::new();
            for w in 0..words {
                if w > 0 {
                    s.push(' ');
                }
                s.push_str(WORDS[rng.random_range(0..WORDS.len())]);
                if rng.random_bool(0.25) {
                    s.push(['.', '!', '?'][rng.random_range(0..3)]);
                }
            }
            s
        })
        .collect();
    Sample {
        id: format!("r{id}"),
        question: "What follows?".into(),
        answer: "a".into(),
        steps: split_rationale(&lines.join("\n")).unwrap(),
        task_kind: TaskKind::Imported,
    }
}

fn check_plan(plan: &ChunkPlan, sample: &Sample, max_chunks: Option<usize>) -> Result<(), String> {
    let n = plan.num_units();
    let b = &plan.boundaries;
    ensure(!b.is_empty() && *b.last().unwrap() == n, || format!("{}: boundaries {b:?} do not end at {n}", sample.id))?;
    ensure(b.windows(2).all(|w| w[0] < w[1]) && b[0] > 0, || format!("{}: boundaries {b:?} not increasing", sample.id))?;
    if let Some(m) = max_chunks {
        ensure(plan.num_chunks() <= m, || format!("{}: {} chunks > {m}", sample.id, plan.num_chunks()))?;
    }
    let texts = plan.chunk_texts(sample).map_err(err)?;
    ensure(texts.iter().all(|t| !t.trim().is_empty()), || format!("{}: empty chunk", sample.id))?;
    let rebuilt = plan.reconstruct(sample).map_err(err)?;
    ensure(rebuilt == sample.rationale(), || format!("{}: reconstruction {rebuilt:?} differs", sample.id))
}

/// Chunk `k` of `m` covers `[k*g, (k+1)*g)`, the last one runs to the end.
fn reference_partition(l: usize, m: usize) -> Vec<usize> {
    let m = m.min(l);
    let g = l / m;
    (0..m).map(|k| if k + 1 == m { l } else { (k + 1) * g }).collect()
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let scorer = HashScorer { salt: 1, levels: 40 };
    for i in 0..1000 {
        let s = random_sample(&mut rng, i, 12);
        let l = s.steps.len();
        let m = rng.random_range(1..=6);
        let ac = average_chunk(&s.id, l, m).map_err(err)?;
        check_plan(&ac, &s, Some(m))?;
        let step = granular_chunk(&s, Granularity::Step).map_err(err)?;
        check_plan(&step, &s, None)?;
        ensure(step.num_chunks() == l, || format!("{}: step mode gave {} chunks", s.id, step.num_chunks()))?;
        let sentence = granular_chunk(&s, Granularity::Sentence).map_err(err)?;
        check_plan(&sentence, &s, None)?;
        ensure(sentence.num_chunks() >= l, || format!("{}: fewer sentences than steps", s.id))?;
        let mut cfg = SearchConfig::new(m);
        cfg.eta = rng.random_range(0.0..0.5);
        let sbc = search_chunk(&ac, &s, &scorer, &cfg).map_err(err)?;
        check_plan(&sbc, &s, Some(m))?;
        ensure(sbc.num_chunks() == ac.num_chunks(), || format!("{}: search changed the chunk count", s.id))?;
    }
    let mut grid = 0;
    for l in 1..=12 {
        for m in 1..=6 {
            let p = average_chunk("g", l, m).map_err(err)?;
            let want = reference_partition(l, m);
            ensure(p.boundaries == want, || format!("L={l} M={m}: {:?} != {want:?}", p.boundaries))?;
            grid += 1;
        }
    }
    Ok(format!("1000 random step lists x 4 modes; {grid} (L, M) cells match"))
}

// ---------------------------------------------------------------- criterion 2

/// Deterministic pseudo-random losses keyed by stage, context and candidate.
struct HashScorer {
    salt: u64,
    /// Number of distinct loss values; small values produce ties.
    levels: u64,
}

impl HashScorer {
    fn loss(&self, stage: usize, question: &str, prior: &[String], candidate: &str) -> f64 {
        let mut h = DefaultHasher::new();
        (self.salt, stage, question, prior, candidate).hash(&mut h);
        (h.finish() % self.levels) as f64 * 3.0 / self.levels as f64
    }
}

impl Scorer for HashScorer {
    fn score(&self, stage: usize, question: &str, prior: &[String], candidate: &str) -> chunkwise::Result<f64> {
        Ok(self.loss(stage, question, prior, candidate))
    }
}

struct ConstantScorer;

impl Scorer for ConstantScorer {
    fn score(&self, _: usize, _: &str, _: &[String], _: &str) -> chunkwise::Result<f64> {
        Ok(2.0)
    }
}

/// Step-by-step re-execution of the greedy boundary search over step lists.
fn oracle_search(steps: &[String], question: &str, initial: &[usize], t: &HashScorer, eta: f64) -> Vec<usize> {
    let text = |a: usize, b: usize| steps[a..b].join("\n");
    let mut bounds = initial.to_vec();
    let chunks = bounds.len();
    for m in 0..chunks - 1 {
        let left = if m == 0 { 0 } else { bounds[m - 1] };
        let right = bounds[m + 1];
        let mut prior = Vec::new();
        let mut from = 0;
        for &b in &bounds[..m] {
            prior.push(text(from, b));
            from = b;
        }
        let current = t.loss(m, question, &prior, &text(left, bounds[m]));
        let mut best_cut = bounds[m];
        let mut best = f64::INFINITY;
        for cut in left + 1..right {
            let l = t.loss(m, question, &prior, &text(left, cut));
            if l < best {
                best = l;
                best_cut = cut;
            }
        }
        if current - best > eta {
            bounds[m] = best_cut;
        }
    }
    bounds
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut moved = 0;
    for i in 0..100 {
        let m = rng.random_range(2..=3);
        let mut s = random_sample(&mut rng, i, 8);
        while s.steps.len() < m {
            s = random_sample(&mut rng, i, 8);
        }
        let l = s.steps.len();
        let mut cuts: Vec<usize> = (1..l).collect();
        let mut initial = Vec::new();
        for _ in 0..m - 1 {
            initial.push(cuts.remove(rng.random_range(0..cuts.len())));
        }
        initial.sort_unstable();
        initial.push(l);
        let plan = ChunkPlan::from_boundaries(&s.id, Unit::Step, initial.clone()).map_err(err)?;
        let scorer = HashScorer {
            salt: i as u64,
            levels: rng.random_range(3..50),
        };
        let mut cfg = SearchConfig::new(m);
        cfg.eta = [0.0, 0.05, 0.3, 1.0][rng.random_range(0..4)];
        let got = search_chunk(&plan, &s, &scorer, &cfg).map_err(err)?;
        let steps: Vec<String> = s.step_texts().iter().map(|t| t.to_string()).collect();
        let want = oracle_search(&steps, &s.question, &initial, &scorer, cfg.eta);
        ensure(got.boundaries == want, || {
            format!("{}: search {:?}, oracle {want:?} (from {initial:?}, eta {})", s.id, got.boundaries, cfg.eta)
        })?;
        moved += usize::from(want != initial);
        ensure(search_chunk(&plan, &s, &ConstantScorer, &cfg).map_err(err)? == plan, || {
            format!("{}: constant scorer moved a boundary", s.id)
        })?;
        cfg.eta = f64::INFINITY;
        ensure(search_chunk(&plan, &s, &scorer, &cfg).map_err(err)? == plan, || {
            format!("{}: infinite eta moved a boundary", s.id)
        })?;
    }
    Ok(format!("100 instances agree with the oracle ({moved} moved a boundary)"))
}

// ---------------------------------------------------------------- criterion 3

fn corpus_mix(n: usize, seed: u64) -> Vec<Sample> {
    let kinds = [TaskKind::ObjectSwap, TaskKind::LastLetter, TaskKind::Arithmetic];
    let per = n.div_ceil(kinds.len());
    let mut out: Vec<Sample> = kinds
        .iter()
        .flat_map(|&k| generate(&TaskConfig::new(k, seed), per).unwrap())
        .collect();
    out.truncate(n);
    out
}

fn expected_skip_target(chunks: &[String], decisions: &[Decision], answer: &str) -> Vec<TokenId> {
    let mut text = String::new();
    for (c, d) in chunks.iter().zip(decisions) {
        match d {
            Decision::Externalize => {
                text.push_str(c);
                text.push('\n');
            }
            Decision::Internalize => text.push_str("[thought]"),
        }
    }
    text.push_str(&format!("<answer> {answer}<eos>"));
    Vocabulary.parse(&text)
}

fn small_model(context: usize) -> ModelConfig {
    ModelConfig {
        vocab_size: Vocabulary::SIZE,
        d_model: 16,
        n_layers: 1,
        n_heads: 2,
        d_ff: 32,
        context,
    }
}

fn criterion_3() -> Check {
    let samples = corpus_mix(1000, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut staged = 0;
    for s in &samples {
        let base = build_baseline_example(s).map_err(err)?;
        let l = s.steps.len();
        let plan = average_chunk(&s.id, l, rng.random_range(1..=l.min(6))).map_err(err)?;
        let cwt = build_cwt_examples(s, &plan).map_err(err)?;
        ensure(token_total(&cwt) == base.target_len(), || {
            format!("{}: {} stage targets vs {} baseline targets", s.id, token_total(&cwt), base.target_len())
        })?;
        staged += cwt.len();
        let decisions: Vec<Decision> = (0..plan.num_chunks())
            .map(|_| if rng.random_bool(0.5) { Decision::Internalize } else { Decision::Externalize })
            .collect();
        let label = SkipLabel {
            sample_id: s.id.clone(),
            decisions: decisions.clone(),
            iteration: 0,
            mode: LabelMode::Accumulating,
        };
        let stt = build_stt_examples(s, &plan, &label).map_err(err)?;
        let chunks = plan.chunk_texts(s).map_err(err)?;
        let want = expected_skip_target(&chunks, &decisions, &s.answer);
        ensure(stt[0].target() == want.as_slice(), || format!("{}: skip target differs from its labels", s.id))?;
        ensure(stt[1..] == cwt[..], || format!("{}: stt stage examples differ from cwt", s.id))?;
    }

    // weight 1.0 reproduces baseline training bit for bit
    let subset = &samples[..24];
    let cfg = small_model(512);
    let mut tc = TrainConfig::desk(5);
    tc.batch_size = 4;
    let train = |weighted: bool| -> Result<Vec<f32>, String> {
        let examples: Vec<_> = subset
            .iter()
            .map(|s| if weighted { build_weighted_example(s, 1.0) } else { build_baseline_example(s) })
            .collect::<chunkwise::Result<_>>()
            .map_err(err)?;
        let mut st = Student::new(cfg, 5).map_err(err)?;
        for batch in examples.chunks(tc.batch_size) {
            let items: Vec<_> = batch.iter().map(|e| e.as_item()).collect();
            st.train_step(&items, 1e-3, &tc).map_err(err)?;
        }
        Ok(st.model.params().to_vec())
    };
    let (a, b) = (train(false)?, train(true)?);
    ensure(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()), || {
        "weight-1.0 training diverged from baseline".into()
    })?;
    Ok(format!(
        "1000 samples: {staged} stage examples conserve targets, skip targets follow labels, weighted == baseline bitwise"
    ))
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Check {
    let tiny = ModelConfig {
        vocab_size: 11,
        d_model: 8,
        n_layers: 2,
        n_heads: 2,
        d_ff: 12,
        context: 16,
    };
    let mut m = Transformer::<f64>::init(tiny, 11).map_err(err)?;
    ensure(m.param_count() <= 5000, || format!("{} parameters", m.param_count()))?;
    let tokens: Vec<TokenId> = vec![3, 1, 4, 1, 5, 9, 2, 6, 5, 3];
    let span = TargetSpan {
        tokens: &tokens,
        start: 4,
        weights: None,
    };
    let mut grad = vec![0.0; m.param_count()];
    m.loss_and_grad(&span, 1.0, &mut grad).map_err(err)?;
    let h = 1e-5;
    let (mut checked, mut worst) = (0, 0.0f64);
    for i in (0..m.param_count()).step_by(2) {
        let orig = m.params()[i];
        let mut scratch = vec![0.0; grad.len()];
        m.params_mut()[i] = orig + h;
        let up = m.loss_and_grad(&span, 0.0, &mut scratch).map_err(err)?;
        m.params_mut()[i] = orig - h;
        let down = m.loss_and_grad(&span, 0.0, &mut scratch).map_err(err)?;
        m.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max(rel);
        checked += 1;
    }
    ensure(checked >= 200 && worst <= 1e-3, || format!("worst relative error {worst:.2e} over {checked}"))?;

    // span loss against token-by-token decoding
    let model = Transformer::<f64>::init(small_model(64), 4).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut span_err = 0.0f64;
    for _ in 0..20 {
        let len = rng.random_range(2..40);
        let seq: Vec<TokenId> = (0..len).map(|_| rng.random_range(0..Vocabulary::SIZE as TokenId)).collect();
        let s = rng.random_range(0..len);
        let (mut cache, mut lp) = model.start().map_err(err)?;
        let mut nll = 0.0;
        for (t, &tok) in seq.iter().enumerate() {
            if t >= s {
                nll -= lp[tok as usize];
            }
            lp = model.feed(&mut cache, tok).map_err(err)?;
        }
        let oracle = nll / (len - s) as f64;
        span_err = span_err.max((span_loss(&model, &seq, s).map_err(err)? - oracle).abs());
    }
    ensure(span_err <= 1e-6, || format!("span loss off by {span_err:.2e}"))?;

    // fixed-seed training twice
    let data = generate(&TaskConfig::new(TaskKind::ObjectSwap, 4), 48).map_err(err)?;
    let mut cfg = RunConfig::desk(Regime::Baseline, TaskKind::ObjectSwap, 4);
    cfg.model = small_model(512);
    cfg.train.epochs = 1;
    let a = run(&cfg, &data[..40], &data[40..]).map_err(err)?;
    let b = run(&cfg, &data[..40], &data[40..]).map_err(err)?;
    ensure(
        param_hash(a.last.model.params()) == param_hash(b.last.model.params()) && a.record == b.record,
        || "two fixed-seed runs differ".into(),
    )?;
    Ok(format!(
        "{checked} gradient coordinates, worst rel err {worst:.1e}; span loss err {span_err:.1e}; training reproducible"
    ))
}

// ---------------------------------------------------------------- criterion 10

fn cli(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_chunkwise"))
        .arg("--config")
        .arg(dir.join("pipeline.toml"))
        .arg("--out")
        .arg(dir.join("data"))
        .args(args)
        .output()
        .map_err(err)?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("chunkwise {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

const PIPELINE: &str = r#"train_size = 24
dev_size = 6

[task]
task_kind = "object_swap"

[run.train]
epochs = 1
batch_size = 4

[run.model]
d_model = 16
n_layers = 1
n_heads = 2
d_ff = 32
context = 512
"#;

fn pipeline(dir: &Path) -> Result<(), String> {
    std::fs::write(dir.join("pipeline.toml"), PIPELINE).map_err(err)?;
    cli(dir, &["--seed", "7", "gen"])?;
    cli(dir, &["--seed", "7", "chunk", "--mode", "ac"])?;
    cli(dir, &["--seed", "7", "chunk", "--mode", "sbc"])?;
    cli(dir, &["--seed", "7", "build", "--kind", "baseline"])?;
    cli(dir, &["--seed", "7", "build", "--kind", "cwt", "--plans", &dir.join("data/plans-sbc.jsonl").to_string_lossy()])?;
    for regime in ["baseline", "cwt_sbc"] {
        cli(dir, &["--seed", "7", "--regime", regime, "train"])?;
        cli(dir, &["--seed", "7", "--regime", regime, "eval"])?;
    }
    cli(dir, &["--seed", "7", "--regime", "stt", "train"])?;
    cli(dir, &["--seed", "7", "--regime", "stt", "eval"])?;
    cli(dir, &["--seed", "7", "report"])?;
    cli(dir, &["--seed", "7", "verify"])?;
    Ok(())
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn criterion_10() -> Check {
    let (a, b) = (tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?);
    pipeline(a.path())?;
    pipeline(b.path())?;
    let (ta, tb) = (tree(&a.path().join("data")), tree(&b.path().join("data")));
    ensure(ta.keys().eq(tb.keys()), || "the two runs wrote different files".into())?;
    for (k, v) in &ta {
        ensure(tb[k] == *v, || format!("{} differs between runs", k.display()))?;
    }
    let train = a.path().join("data/train.jsonl");
    let mut text = std::fs::read_to_string(&train).map_err(err)?;
    text.push('\n');
    std::fs::write(&train, text).map_err(err)?;
    ensure(cli(a.path(), &["--seed", "7", "verify"]).is_err(), || "verify accepted a modified input".into())?;
    Ok(format!("{} files identical across two runs; every recorded hash verifies; tampering detected", ta.len()))
}

// ------------------------------------------------------------ trend criteria

struct Trends {
    epochs: Option<usize>,
    seeds: Vec<u64>,
}

struct Split {
    train: Vec<Sample>,
    dev: Vec<Sample>,
}

impl Trends {
    fn data(&self, kind: TaskKind, seed: u64) -> Split {
        let mut all = generate(&TaskConfig::new(kind, seed), 2200).unwrap();
        let dev = all.split_off(2000);
        Split { train: all, dev }
    }

    fn config(&self, regime: Regime, kind: TaskKind, seed: u64) -> RunConfig {
        let mut c = RunConfig::desk(regime, kind, seed);
        if let Some(e) = self.epochs {
            c.train.epochs = e;
        }
        c
    }

    fn run(&self, regime: Regime, kind: TaskKind, seed: u64, d: &Split) -> Result<RunOutcome, String> {
        let t = Instant::now();
        let out = run(&self.config(regime, kind, seed), &d.train, &d.dev).map_err(err)?;
        eprintln!(
            "  {regime} seed {seed}: acc {:.3} tokens {:.1} cap {:.3} ({:.0}s)",
            out.dev_report.accuracy,
            out.dev_report.mean_tokens,
            out.dev_report.cap_rate,
            t.elapsed().as_secs_f64()
        );
        Ok(out)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn verdict(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Criteria 5, 6, 7 and 9 share the object-swap runs.
fn object_swap_trends(t: &Trends) -> Vec<(u8, &'static str, Check)> {
    let kind = TaskKind::ObjectSwap;
    let mut out = Vec::new();
    let started = Instant::now();
    let mut accs: BTreeMap<Regime, Vec<f64>> = BTreeMap::new();
    let mut sbc_runs = Vec::new();
    let mut data = Vec::new();
    let mut batch_acc: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut failure: Option<String> = None;
    for &seed in &t.seeds {
        let d = t.data(kind, seed);
        for regime in [Regime::Baseline, Regime::CwtAc, Regime::CwtSbc] {
            match t.run(regime, kind, seed, &d) {
                Ok(o) => {
                    accs.entry(regime).or_default().push(o.dev_report.accuracy);
                    if regime == Regime::Baseline {
                        batch_acc.entry(2).or_default().push(o.dev_report.accuracy);
                    }
                    if regime == Regime::CwtSbc {
                        sbc_runs.push(o);
                    }
                }
                Err(e) => failure = Some(e),
            }
        }
        data.push(d);
    }
    let c5_time = started.elapsed().as_secs_f64();
    let c5 = match &failure {
        Some(e) => Err(e.clone()),
        None => {
            let (b, ac, sbc) = (mean(&accs[&Regime::Baseline]), mean(&accs[&Regime::CwtAc]), mean(&accs[&Regime::CwtSbc]));
            verdict(
                sbc >= ac && sbc >= b + 0.05 && c5_time <= 1200.0,
                format!("baseline {b:.3}, cwt_ac {ac:.3}, cwt_sbc {sbc:.3} over {} seeds in {c5_time:.0}s", t.seeds.len()),
            )
        }
    };
    out.push((5, "cwt trend", c5));

    let c6 = (|| -> Check {
        if let Some(e) = &failure {
            return Err(e.clone());
        }
        let (mut ratios, mut stt_acc, mut sbc_acc) = (Vec::new(), Vec::new(), Vec::new());
        for ((sbc, d), &seed) in sbc_runs.iter().zip(&data).zip(&t.seeds) {
            let plans = sbc.plans.clone().ok_or("cwt_sbc run kept no plans")?;
            let stt = run_stt(&t.config(Regime::Stt, kind, seed), &d.train, &d.dev, &sbc.best, plans).map_err(err)?;
            ratios.push(speedup_ratio(&sbc.dev_report, &stt.dev_report).map_err(err)?);
            stt_acc.push(stt.dev_report.accuracy);
            sbc_acc.push(sbc.dev_report.accuracy);
            eprintln!("  stt seed {seed}: acc {:.3} tokens {:.1}", stt.dev_report.accuracy, stt.dev_report.mean_tokens);
        }
        let (r, a, s) = (mean(&ratios), mean(&stt_acc), mean(&sbc_acc));
        verdict(r >= 1.2 && a >= s - 0.02, format!("speedup {r:.2}, stt acc {a:.3} vs cwt_sbc {s:.3}"))
    })();
    out.push((6, "stt speed/accuracy", c6));

    let c7 = (|| -> Check {
        if let Some(e) = &failure {
            return Err(e.clone());
        }
        for (d, &seed) in data.iter().zip(&t.seeds) {
            for batch in [1, 4, 8] {
                let mut cfg = t.config(Regime::Baseline, kind, seed);
                cfg.train.batch_size = batch;
                let o = run(&cfg, &d.train, &d.dev).map_err(err)?;
                eprintln!("  baseline batch {batch} seed {seed}: acc {:.3}", o.dev_report.accuracy);
                batch_acc.entry(batch).or_default().push(o.dev_report.accuracy);
            }
        }
        let row: Vec<String> = batch_acc.iter().map(|(b, v)| format!("{b}:{:.3}", mean(v))).collect();
        verdict(mean(&batch_acc[&1]) >= mean(&batch_acc[&8]), format!("accuracy by batch size {}", row.join(" ")))
    })();
    out.push((7, "token-batch sweep", c7));

    let c9 = (|| -> Check {
        if let Some(e) = &failure {
            return Err(e.clone());
        }
        let mut caps = Vec::new();
        for (d, &seed) in data.iter().zip(&t.seeds) {
            let mut cfg = t.config(Regime::StepWise, kind, seed);
            cfg.granular_prefix = false;
            let o = run(&cfg, &d.train, &d.dev).map_err(err)?;
            eprintln!("  step_wise seed {seed}: cap rate {:.3}", o.dev_report.cap_rate);
            caps.push(o.dev_report.cap_rate);
        }
        let sbc_caps: Vec<f64> = sbc_runs.iter().map(|o| o.dev_report.cap_rate).collect();
        let (step, sbc) = (mean(&caps), mean(&sbc_caps));
        verdict(step >= 0.2 && sbc < 0.05, format!("cap rate step_wise {step:.3}, cwt_sbc {sbc:.3}"))
    })();
    out.push((9, "length-cap failure mode", c9));
    out
}

fn criterion_8(t: &Trends) -> Check {
    let kind = TaskKind::Arithmetic;
    let (mut base, mut sbc) = (Vec::new(), Vec::new());
    for &seed in &t.seeds {
        let d = t.data(kind, seed);
        let b = t.run(Regime::Baseline, kind, seed, &d)?;
        base.push(confidence_report(&b.best, &d.dev, ConfidenceLayout::Full).map_err(err)?.gap);
        let s = t.run(Regime::CwtSbc, kind, seed, &d)?;
        let plans = average_plans(&d.dev, t.config(Regime::CwtSbc, kind, seed).chunks).map_err(err)?;
        sbc.push(confidence_report(&s.best, &d.dev, ConfidenceLayout::Staged(&plans)).map_err(err)?.gap);
    }
    let (b, s) = (mean(&base), mean(&sbc));
    verdict(s < b, format!("confidence gap (other - core) cwt_sbc {s:.2} vs baseline {b:.2}"))
}

// ----------------------------------------------------------------------- main

fn report(n: u8, name: &str, result: &Check, secs: f64, exact: bool) -> bool {
    let kind = if exact { "exact" } else { "trend" };
    match result {
        Ok(d) => println!("criterion {n:>2} [{kind}] {name}: PASS ({d}) [{secs:.1}s]"),
        Err(d) => println!("criterion {n:>2} [{kind}] {name}: FAIL ({d}) [{secs:.1}s]"),
    }
    result.is_ok()
}

fn timed(f: impl FnOnce() -> Check) -> (Check, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    // `cargo test -- <filter>` style arguments are accepted and ignored.
    let mut exact_ok = true;
    let exact: [(u8, &str, fn() -> Check); 5] = [
        (1, "chunking correctness", criterion_1),
        (2, "search oracle equivalence", criterion_2),
        (3, "data-construction conservation", criterion_3),
        (4, "model numerics", criterion_4),
        (10, "pipeline provenance", criterion_10),
    ];
    for (n, name, f) in exact {
        let (r, secs) = timed(f);
        exact_ok &= report(n, name, &r, secs, true);
    }

    let names = [
        (5, "cwt trend"),
        (6, "stt speed/accuracy"),
        (7, "token-batch sweep"),
        (8, "confidence-gap trend"),
        (9, "length-cap failure mode"),
    ];
    if std::env::var("CHUNKWISE_TRENDS").is_ok_and(|v| v == "1") {
        let t = Trends {
            epochs: std::env::var("CHUNKWISE_TREND_EPOCHS").ok().and_then(|v| v.parse().ok()),
            seeds: vec![0, 1, 2],
        };
        let start = Instant::now();
        let mut results = object_swap_trends(&t);
        let swap_secs = start.elapsed().as_secs_f64();
        let (r8, secs8) = timed(|| criterion_8(&t));
        results.push((8, "confidence-gap trend", r8));
        results.sort_by_key(|r| r.0);
        for (n, name, r) in &results {
            let secs = if *n == 8 { secs8 } else { swap_secs };
            report(*n, name, r, secs, false);
        }
        println!("trend suite: {:.0}s total", start.elapsed().as_secs_f64());
    } else {
        for (n, name) in names {
            println!("criterion {n:>2} [trend] {name}: SKIP (set CHUNKWISE_TRENDS=1 to train the desk-scale runs)");
        }
    }

    if exact_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
