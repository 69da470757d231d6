use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use subprobe::probe::{LayerMode, TrainerConfig};
use subprobe::probe_dataset::{extract_candidates, sample_splits, MorphTask, SplitSizes};
use subprobe::sequence::{
    layer_sweep, train_tagger, LayerSelector, SweepSpec, SweepTask, TagScheme, TagSplits, TagStores, TaggedSentence,
};
use subprobe::store::{EmbeddingStore, Pooling};
use subprobe::synth::{argmax_tagging, planted_probe_store, random_store, synthetic_conllu, CorpusSpec, Signal};
use subprobe::Error;

fn quick() -> TrainerConfig {
    TrainerConfig {
        max_epochs: 25,
        seed: 4,
        ..TrainerConfig::default()
    }
}

#[test]
fn argmax_store_is_learnable() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (splits, store) = argmax_tagging("toy", [400, 60, 200], 3, 3, 8, &mut rng);
    let run = train_tagger(
        &splits,
        TagStores::shared(&store),
        TagScheme::Pos,
        Pooling::First,
        LayerMode::Single(2),
        &quick(),
    )
    .unwrap();
    assert!(run.report.test_metric >= 0.99, "{}", run.report.test_metric);
    assert_eq!(run.report.labels, ["T0", "T1", "T2"]);
}

#[test]
fn tagger_is_seed_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (splits, store) = argmax_tagging("toy", [60, 20, 20], 2, 2, 4, &mut rng);
    let go = || {
        train_tagger(&splits, TagStores::shared(&store), TagScheme::Pos, Pooling::Last, LayerMode::Mix, &quick())
            .unwrap()
            .report
    };
    assert_eq!(go(), go());
}

#[test]
fn single_label_corpus_is_degenerate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let store = random_store("m", &[2, 2, 2], 2, 3, &mut rng);
    let sent = |id| TaggedSentence {
        sentence_id: id,
        words: vec!["a".into(), "b".into()],
        tags: vec!["NOUN".into(), "NOUN".into()],
    };
    let splits = TagSplits {
        train: vec![sent(0)],
        dev: vec![sent(1)],
        test: vec![sent(2)],
    };
    let err = train_tagger(&splits, TagStores::shared(&store), TagScheme::Pos, Pooling::First, LayerMode::Single(0), &quick());
    assert!(matches!(err, Err(Error::Degenerate(_))));
}

#[test]
fn misaligned_sentence_is_named() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let store = random_store("m", &[2, 3], 2, 3, &mut rng);
    let splits = TagSplits {
        train: vec![TaggedSentence {
            sentence_id: 1,
            words: vec!["a".into(), "b".into()],
            tags: vec!["X".into(), "Y".into()],
        }],
        ..Default::default()
    };
    match train_tagger(&splits, TagStores::shared(&store), TagScheme::Pos, Pooling::First, LayerMode::Single(0), &quick()) {
        Err(Error::Alignment { sentence_id, .. }) => assert_eq!(sentence_id, 1),
        other => panic!("unexpected {:?}", other.map(|r| r.report)),
    }
}

#[test]
fn ner_tagger_scores_spans() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut splits, store) = argmax_tagging("toy", [300, 50, 100], 3, 2, 6, &mut rng);
    for s in splits.train.iter_mut().chain(&mut splits.dev).chain(&mut splits.test) {
        for t in &mut s.tags {
            *t = match t.as_str() {
                "T0" => "O".into(),
                "T1" => "B-PER".into(),
                _ => "B-LOC".into(),
            };
        }
    }
    let run = train_tagger(&splits, TagStores::shared(&store), TagScheme::Ner, Pooling::Last, LayerMode::Single(1), &quick())
        .unwrap();
    let spans = run.report.test_spans.expect("span report");
    assert!(spans.totals.gold > 0);
    assert_eq!(run.report.test_metric, spans.f1);
    assert!(spans.f1 > 0.95, "{}", spans.f1);
}

fn probe_dataset_and_store(layers: usize, signal_layer: usize, seed: u64) -> (subprobe::probe_dataset::ProbingDataset, EmbeddingStore) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = CorpusSpec {
        sentences: 1200,
        labels: vec![("Nom".into(), 1), ("Acc".into(), 1), ("Dat".into(), 1)],
        forms_per_label: 80,
        max_nouns_per_sentence: 2,
    };
    let text = synthetic_conllu(&spec, &mut rng);
    let corpus = subprobe::conllu::parse(text.as_bytes()).unwrap();
    let pool = extract_candidates(&corpus, &MorphTask::parse("Case:NOUN").unwrap());
    let sizes = SplitSizes { train: 600, dev: 100, test: 300 };
    let dataset = sample_splits(&pool, sizes, 3, seed).unwrap();
    let signal = Signal { layers: vec![signal_layer], margin: 1.0, noise: 0.4, max_pieces: 3 };
    let store = planted_probe_store(&dataset, &format!("model{seed}"), layers, 8, &signal, &mut rng);
    (dataset, store)
}

#[test]
fn two_layer_store_collapses_named_layers() {
    let (dataset, store) = probe_dataset_and_store(2, 1, 6);
    let spec = SweepSpec { config: quick(), ..SweepSpec::default() };
    let report = layer_sweep(SweepTask::Probe(&dataset), &[TagStores::shared(&store)], &spec).unwrap();
    let layers: Vec<&str> = report.rows.iter().map(|r| r.layer.as_str()).collect();
    assert_eq!(layers, ["embedding", "embedding", "first+middle+highest", "first+middle+highest"]);
}

#[test]
fn sweep_peaks_at_signal_layer_and_repeats() {
    let (dataset, store) = probe_dataset_and_store(5, 2, 7);
    let spec = SweepSpec {
        layers: vec![LayerSelector::All],
        poolings: vec![Pooling::Last],
        config: quick(),
        seed: 9,
        jobs: 3,
    };
    let report = layer_sweep(SweepTask::Probe(&dataset), &[TagStores::shared(&store)], &spec).unwrap();
    let best = report.rows.iter().max_by(|a, b| a.test.total_cmp(&b.test)).unwrap();
    assert_eq!(best.layer_index, Some(2), "{:?}", report.rows);

    let serial = layer_sweep(SweepTask::Probe(&dataset), &[TagStores::shared(&store)], &SweepSpec { jobs: 1, ..spec })
        .unwrap();
    assert_eq!(report, serial);
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 5);
}
