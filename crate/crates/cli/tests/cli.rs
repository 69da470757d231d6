use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use subprobe::probe_dataset::ProbingDataset;
use subprobe::run::file_sha256;
use subprobe::sequence::TaggedSentence;
use subprobe::store::{write_store, EmbeddingStore};
use subprobe::synth::{argmax_tagging, planted_probe_store, synthetic_conllu, CorpusSpec, Signal};
use tempfile::TempDir;

fn subprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = subprobe(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn error_json(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("stderr has a line");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not JSON: {stderr}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn save_store(store: &EmbeddingStore, path: &Path) {
    write_store(fs::File::create(path).unwrap(), &store.header, &store.records).unwrap();
}

fn write_conllu(dir: &Path, sentences: usize, seed: u64) -> PathBuf {
    let spec = CorpusSpec {
        sentences,
        labels: vec![("Nom".into(), 3), ("Acc".into(), 2)],
        forms_per_label: 150,
        max_nouns_per_sentence: 2,
    };
    let path = dir.join("corpus.conllu");
    fs::write(&path, synthetic_conllu(&spec, &mut ChaCha8Rng::seed_from_u64(seed))).unwrap();
    path
}

/// genprobe into `dir/data`, plus planted stores (signal at `signal_layer`).
fn probe_fixture(dir: &Path, models: &[(&str, usize)], signal_layer: usize) -> (PathBuf, Vec<PathBuf>) {
    let conllu = write_conllu(dir, 1500, 7);
    let data = dir.join("data");
    ok(&[
        "genprobe", "--conllu", p(&conllu), "--task", "Case:NOUN", "--train", "400", "--dev", "100", "--test",
        "100", "--seed", "3", "--out", p(&data),
    ]);
    let dataset = ProbingDataset::read_dir(&data).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let signal = Signal {
        layers: vec![signal_layer],
        margin: 1.5,
        noise: 0.5,
        max_pieces: 3,
    };
    let stores = models
        .iter()
        .map(|&(name, layers)| {
            let store = planted_probe_store(&dataset, name, layers, 8, &signal, &mut rng);
            let path = dir.join(format!("{name}.embs"));
            save_store(&store, &path);
            path
        })
        .collect();
    (data, stores)
}

fn tree_digest(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), file_sha256(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn tokenize_then_tokstats() {
    let tmp = TempDir::new().unwrap();
    let vocab = tmp.path().join("vocab.txt");
    fs::write(&vocab, "[UNK]\nun\nhappy\n##happy\n##ness\nthe\ncat\n##s\n").unwrap();
    let text = tmp.path().join("text.txt");
    fs::write(&text, "the unhappy cats\nthe unhappiness\nthe cat\n").unwrap();
    let seg = tmp.path().join("seg.tsv");
    ok(&["tokenize", "--vocab", p(&vocab), "--input", p(&text), "--out", p(&seg), "--counts"]);
    let seg_text = fs::read_to_string(&seg).unwrap();
    assert_eq!(seg_text.lines().next(), Some("the\t3\tthe"));
    assert!(seg_text.contains("unhappy\t1\tun ##happy"));
    assert!(seg_text.contains("unhappiness\t1\t[UNK]"));
    assert!(tmp.path().join("seg.manifest.json").exists());

    let stats = tmp.path().join("stats");
    let out = ok(&["--jobs", "2", "tokstats", "--segmented", &format!("toy={}", p(&seg)), "--out-dir", p(&stats)]);
    let table = fs::read_to_string(stats.join("table.txt")).unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), table);
    let report: Value = serde_json::from_slice(&fs::read(stats.join("report.json")).unwrap()).unwrap();
    assert!(report.get("toy").is_some());
    assert!(stats.join("profile_toy.csv").exists());
    let manifest: Value = serde_json::from_slice(&fs::read(stats.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["workflow"], "tokstats");
}

#[test]
fn sweep_over_two_models_writes_full_grid() {
    let tmp = TempDir::new().unwrap();
    let (data, stores) = probe_fixture(tmp.path(), &[("alpha", 13), ("beta", 13)], 6);
    let out_dir = tmp.path().join("sweep");
    ok(&[
        "sweep", "--task", "probe", "--data", p(&data), "--store", p(&stores[0]), "--store", p(&stores[1]),
        "--pools", "first,last", "--epochs", "15", "--out-dir", p(&out_dir),
    ]);
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 4 * 2, "{csv}");
    assert!(lines[0].starts_with("model,layer,"));
    // The middle layer of 13 carries the planted signal.
    let report: Value = serde_json::from_slice(&fs::read(out_dir.join("sweep.json")).unwrap()).unwrap();
    for row in report["rows"].as_array().unwrap() {
        let test = row["test"].as_f64().unwrap();
        if row["layer"] == "middle" {
            assert!(test > 0.9, "{row}");
        } else if row["layer"] == "embedding" {
            assert!(test < 0.8, "{row}");
        }
    }

    let table = tmp.path().join("table.txt");
    ok(&["report", "--input", p(&out_dir.join("sweep.json")), "--out", p(&table)]);
    let rendered = fs::read_to_string(&table).unwrap();
    assert!(rendered.contains("alpha") && rendered.contains("beta"));
    assert!(rendered.contains("middle"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let (data, stores) = probe_fixture(tmp.path(), &[("alpha", 5)], 2);
    let run = |dir: &Path| {
        ok(&[
            "sweep", "--task", "probe", "--data", p(&data), "--store", p(&stores[0]), "--layers", "embedding,middle",
            "--pools", "last", "--epochs", "5", "--seed", "9", "--out-dir", p(dir),
        ]);
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&a);
    let da = tree_digest(&a);
    assert_eq!(da.len(), 3);
    run(&a);
    assert_eq!(da, tree_digest(&a));
    // The manifest records the output path, so only results match across dirs.
    run(&b);
    let results = |d: Vec<(String, String)>| d.into_iter().filter(|(n, _)| n != "run_manifest.json").collect::<Vec<_>>();
    assert_eq!(results(da), results(tree_digest(&b)));

    let again = tmp.path().join("data2");
    let conllu = tmp.path().join("corpus.conllu");
    ok(&[
        "genprobe", "--conllu", p(&conllu), "--task", "Case:NOUN", "--train", "400", "--dev", "100", "--test",
        "100", "--seed", "3", "--out", p(&again),
    ]);
    assert_eq!(results(tree_digest(&data)), results(tree_digest(&again)));
}

#[test]
fn invalid_input_fails_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("never");
    let missing = tmp.path().join("missing.conllu");
    let out = subprobe(&["genprobe", "--conllu", p(&missing), "--task", "Case:NOUN", "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "missing_input");
    assert!(!out_dir.exists());

    // A corpus without the requested feature gets past argument checks but
    // cannot yield a dataset; nothing must be left behind.
    let conllu = write_conllu(tmp.path(), 50, 1);
    let out = subprobe(&["genprobe", "--conllu", p(&conllu), "--task", "Tense:VERB", "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_json(&out)["error"]["kind"].is_string());
    assert!(!out_dir.exists());

    let out = subprobe(&["probe", "train", "--data", p(tmp.path()), "--layer", "middle"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "config");

    let out = subprobe(&["sweep", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");
}

#[test]
fn probe_train_and_extract_check() {
    let tmp = TempDir::new().unwrap();
    let (data, stores) = probe_fixture(tmp.path(), &[("alpha", 4)], 2);
    let report_path = tmp.path().join("probe.json");
    ok(&[
        "probe", "train", "--data", p(&data), "--store", p(&stores[0]), "--layer", "middle", "--pool", "max",
        "--epochs", "20", "--out", p(&report_path),
    ]);
    let report: Value = serde_json::from_slice(&fs::read(&report_path).unwrap()).unwrap();
    assert!(report["test_accuracy"].as_f64().unwrap() > 0.9, "{report}");
    assert!(tmp.path().join("probe.manifest.json").exists());

    let sentences = data.join("sentences.txt");
    let out = ok(&[
        "extract-check", "--store", p(&stores[0]), "--sentences", p(&sentences), "--layers", "4", "--hidden", "8",
        "--model", "alpha",
    ]);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["model"], "alpha");
    assert_eq!(summary["missing_sentences"], 0);

    let out = subprobe(&["extract-check", "--store", p(&stores[0]), "--hidden", "16"]);
    assert_eq!(out.status.code(), Some(1));

    let corrupt = tmp.path().join("corrupt.embs");
    let mut bytes = fs::read(&stores[0]).unwrap();
    bytes.truncate(bytes.len() - 5);
    fs::write(&corrupt, &bytes).unwrap();
    let out = subprobe(&["extract-check", "--store", p(&corrupt)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"]["kind"], "store");
}

fn write_pos(path: &Path, sentences: &[TaggedSentence]) {
    let mut text = String::new();
    for s in sentences {
        for (i, (w, t)) in s.words.iter().zip(&s.tags).enumerate() {
            text.push_str(&format!("{}\t{w}\t_\t{t}\t_\t_\t_\t_\t_\t_\n", i + 1));
        }
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn tag_train_with_split_stores_and_config_file() {
    let tmp = TempDir::new().unwrap();
    let stores = tmp.path().join("stores");
    fs::create_dir(&stores).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (split, n) in [("train", 300), ("dev", 60), ("test", 60)] {
        let (splits, store) = argmax_tagging("toy", [n, 0, 0], 4, 3, 8, &mut rng);
        write_pos(&tmp.path().join(format!("{split}.conllu")), &splits.train);
        save_store(&store, &stores.join(format!("{split}.embs")));
    }
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        "[tag.train]\ntask = \"pos\"\nlayer = \"highest\"\nepochs = 3\nhidden-units = 20\n",
    )
    .unwrap();
    let out_path = tmp.path().join("pos.json");
    let split = |s: &str| tmp.path().join(format!("{s}.conllu"));
    let (train, dev, test) = (split("train"), split("dev"), split("test"));
    ok(&[
        "--config", p(&config), "tag", "train", "--train", p(&train), "--dev", p(&dev), "--test", p(&test),
        "--store", p(&stores), "--epochs", "30", "--out", p(&out_path),
    ]);
    let report: Value = serde_json::from_slice(&fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(report["scheme"], "pos");
    assert_eq!(report["layer"], "2");
    // The flag wins over the config value of 3.
    assert!(report["history"].as_array().unwrap().len() > 3, "{report}");
    assert!(report["test_metric"].as_f64().unwrap() > 0.9, "{report}");

    let manifest: Value = serde_json::from_slice(&fs::read(tmp.path().join("pos.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["hidden_units"], 20);
    assert_eq!(manifest["config"]["epochs"], 30);

    fs::write(&config, "[tag.train]\nbogus = 1\n").unwrap();
    let out = subprobe(&["--config", p(&config), "tag", "train"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "config");
}
