use chunkwise::chunking::{average_chunk, search_chunk, ModelScorer, SearchConfig};
use chunkwise::corpus::{generate, generate_one, load_dataset, save_dataset, TaskConfig, TaskKind};
use chunkwise::databuild::{build_baseline_example, build_cwt_examples, token_total};
use chunkwise::eval::{evaluate, DecodeMode};
use chunkwise::model::checkpoint::{load_checkpoint, save_model};
use chunkwise::model::{ModelConfig, Transformer, Vocabulary};
use chunkwise::train::{run, Regime, RunConfig};
use proptest::prelude::*;

fn small() -> ModelConfig {
    ModelConfig {
        vocab_size: Vocabulary::SIZE,
        d_model: 16,
        n_layers: 1,
        n_heads: 2,
        d_ff: 32,
        context: 512,
    }
}

fn kind_strategy() -> impl Strategy<Value = TaskKind> {
    prop_oneof![
        Just(TaskKind::ObjectSwap),
        Just(TaskKind::LastLetter),
        Just(TaskKind::Arithmetic)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stage_examples_conserve_targets_for_generated_samples(kind in kind_strategy(), seed in 0u64..1000, index in 0usize..500, m in 1usize..6) {
        let s = generate_one(&TaskConfig::new(kind, seed), index).unwrap();
        let plan = average_chunk(&s.id, s.steps.len(), m).unwrap();
        let cwt = build_cwt_examples(&s, &plan).unwrap();
        prop_assert_eq!(token_total(&cwt), build_baseline_example(&s).unwrap().target_len());
        prop_assert_eq!(plan.reconstruct(&s).unwrap(), s.rationale());
    }

    #[test]
    fn model_scored_search_keeps_partitions_valid(seed in 0u64..50, index in 0usize..100, m in 2usize..4) {
        let s = generate_one(&TaskConfig::new(TaskKind::LastLetter, seed), index).unwrap();
        let model = Transformer::<f32>::init(small(), seed).unwrap();
        let start = average_chunk(&s.id, s.steps.len(), m).unwrap();
        let out = search_chunk(&start, &s, &ModelScorer::new(&model), &SearchConfig::new(m)).unwrap();
        prop_assert_eq!(out.num_chunks(), start.num_chunks());
        prop_assert_eq!(out.reconstruct(&s).unwrap(), s.rationale());
    }
}

#[test]
fn dataset_and_checkpoint_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&TaskConfig::new(TaskKind::Arithmetic, 2), 10).unwrap();
    let p = dir.path().join("d.jsonl");
    save_dataset(&data, &p, None).unwrap();
    assert_eq!(load_dataset(&p).unwrap(), data);

    let model = Transformer::<f32>::init(small(), 2).unwrap();
    let ck = dir.path().join("m.ckpt");
    save_model(&model, None, &ck, None).unwrap();
    let (header, back) = load_checkpoint(&ck).unwrap();
    assert!(header.provenance.is_none());
    assert_eq!(back.params(), model.params());
}

#[test]
fn trained_runs_evaluate_under_their_own_protocol() {
    let data = generate(&TaskConfig::new(TaskKind::ObjectSwap, 1), 30).unwrap();
    for regime in [Regime::Baseline, Regime::CwtAc, Regime::Skipall] {
        let mut cfg = RunConfig::desk(regime, TaskKind::ObjectSwap, 1);
        cfg.model = small();
        cfg.train.epochs = 1;
        let out = run(&cfg, &data[..24], &data[24..]).unwrap();
        assert_eq!(out.record.epochs.len(), 1);
        let again = evaluate(&out.best, &data[24..], cfg.decode_mode()).unwrap();
        assert_eq!(again.accuracy, out.dev_report.accuracy, "{regime}");
        assert_eq!(again.mean_tokens, out.dev_report.mean_tokens, "{regime}");
        assert!(cfg.check_mode(DecodeMode::Full).is_ok() == (regime == Regime::Baseline));
    }
}
