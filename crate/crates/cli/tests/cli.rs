use std::path::{Path, PathBuf};

use sentigru::corpus::synthetic_corpus;
use sentigru_cli::{run_with, EXIT_DATA, EXIT_OK, EXIT_USAGE};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn sentigru(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("sentigru").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write_corpus(dir: &Path, records: usize) -> PathBuf {
    let path = dir.join("data.csv");
    let mut text = String::from("text,label\n");
    for r in synthetic_corpus(records, 1).records {
        text.push_str(&format!("{},{}\n", r.text, r.label));
    }
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL: [&str; 10] = [
    "--vocab-size",
    "64",
    "--embed-dim",
    "8",
    "--units",
    "8,4,4",
    "--seq-len",
    "12",
    "--batch-size",
    "16",
];

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn summary_of_the_reference_configuration() {
    let o = sentigru(&["summary", "--config", "paper"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stdout.contains("Total params: 2817126"));
    assert!(o.stdout.contains("(None, 79, 240)"));
}

#[test]
fn usage_errors_exit_with_one() {
    let o = sentigru(&["frobnicate"]);
    assert_eq!(o.code, EXIT_USAGE);
    assert!(o.stderr.contains("Usage"));
    assert!(o.stdout.is_empty());
    assert_eq!(sentigru(&[]).code, EXIT_USAGE);
    assert_eq!(sentigru(&["train", "--epochs", "zero"]).code, EXIT_USAGE);
    assert_eq!(
        sentigru(&[
            "train",
            "--dropout",
            "1.5",
            "--data",
            "x.csv",
            "--out",
            "m.bin"
        ])
        .code,
        EXIT_USAGE
    );
    let o = sentigru(&["train", "--data", "x.csv"]);
    assert_eq!(o.code, EXIT_USAGE);
    assert!(o.stderr.contains("--out"));
    assert_eq!(sentigru(&["predict", "--model", "m.bin"]).code, EXIT_USAGE);
}

#[test]
fn help_goes_to_stdout() {
    let o = sentigru(&["--help"]);
    assert_eq!(o.code, EXIT_OK);
    for cmd in [
        "stats",
        "preprocess",
        "train",
        "evaluate",
        "predict",
        "summary",
    ] {
        assert!(o.stdout.contains(cmd), "{cmd}");
    }
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(sentigru(&["stats", "--data", s(&missing)]).code, EXIT_DATA);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "text,label\nhello there,9\n").unwrap();
    let o = sentigru(&["stats", "--data", s(&bad)]);
    assert_eq!(o.code, EXIT_DATA);
    assert!(o.stderr.contains("out of range"), "{}", o.stderr);

    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"not a model").unwrap();
    assert_eq!(
        sentigru(&["predict", "--model", s(&junk), "--text", "hi"]).code,
        EXIT_DATA
    );
    assert_eq!(
        sentigru(&["summary", "--config", s(&missing)]).code,
        EXIT_DATA
    );
}

#[test]
fn stats_exports_one_document_per_label() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_corpus(dir.path(), 30);
    let out = dir.path().join("stats");
    let o = sentigru(&[
        "stats",
        "--data",
        s(&data),
        "--out",
        s(&out),
        "--top-k",
        "3",
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    for name in ["sadness", "joy", "love", "anger", "fear", "surprise", "all"] {
        let doc: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(out.join(format!("{name}.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(doc["label_name"], name);
        assert!(doc["entries"].as_array().unwrap().len() <= 3);
        assert!(doc["total_tokens"].as_u64().unwrap() > 0);
    }

    let o = sentigru(&["stats", "--data", s(&data)]);
    let docs: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(docs.as_array().unwrap().len(), 7);
}

#[test]
fn preprocess_emits_fixed_length_ids() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "text,label\nI dont know i feel so lost,0\n").unwrap();
    let o = sentigru(&["preprocess", "--data", s(&data), "--seq-len", "5"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let doc: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    let rec = &doc["records"][0];
    assert_eq!(rec["tokens"], serde_json::json!(["know", "feel", "lost"]));
    assert_eq!(rec["ids"].as_array().unwrap().len(), 5);
    assert_eq!(rec["ids"][0], 0);
    assert_eq!(doc["vocabulary"][0], "<pad>");
}

#[test]
fn train_evaluate_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_corpus(dir.path(), 60);
    let model = dir.path().join("model.bin");
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--out",
        s(&model),
        "--epochs",
        "3",
        "--seed",
        "7",
    ];
    args.extend(SMALL);
    let o = sentigru(&args);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stderr.contains("epoch 3:"));

    let history: Vec<serde_json::Value> = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("model.history.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(history.len(), 3);
    for key in [
        "epoch",
        "train_loss",
        "train_acc",
        "val_loss",
        "val_acc",
        "seconds",
    ] {
        assert!(history[0].get(key).is_some(), "{key}");
    }
    let csv = std::fs::read_to_string(dir.path().join("model.history.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("model.eval.json").exists());

    let o = sentigru(&["evaluate", "--model", s(&model), "--data", s(&data)]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let report: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(report["total"], 60);
    assert_eq!(report["per_class"].as_array().unwrap().len(), 6);

    let o = sentigru(&["predict", "--model", s(&model), "--text", "i feel so lost"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let p: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    let probs = p["probabilities"].as_array().unwrap();
    assert_eq!(probs.len(), 6);
    assert!((probs.iter().map(|v| v.as_f64().unwrap()).sum::<f64>() - 1.0).abs() < 1e-5);
    assert!(p["name"].is_string() && p["label"].is_u64());

    let o = sentigru(&[
        "predict",
        "--model",
        s(&model),
        "--text",
        "a",
        "--text",
        "b",
    ]);
    let many: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(many.as_array().unwrap().len(), 2);

    let o = sentigru(&["summary", "--model", s(&model)]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.contains("(None, 12, 16)"));
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_corpus(dir.path(), 24);
    let before = std::fs::read(&data).unwrap();
    let model = dir.path().join("m.bin");
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--out",
        s(&model),
        "--epochs",
        "1",
    ];
    args.extend(SMALL);
    assert_eq!(sentigru(&args).code, EXIT_OK);
    let model_bytes = std::fs::read(&model).unwrap();
    assert_eq!(
        sentigru(&["evaluate", "--model", s(&model), "--data", s(&data)]).code,
        EXIT_OK
    );
    assert_eq!(std::fs::read(&data).unwrap(), before);
    assert_eq!(std::fs::read(&model).unwrap(), model_bytes);
}

#[test]
fn config_file_with_flag_override_and_f64_models() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 24);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# small run\ndata = data.csv\nepochs = 4\nvocab_size = 64\nembed_dim = 8\nunits = 8,4,4\nseq_len = 12\nprecision = f64\n",
    )
    .unwrap();
    let model = dir.path().join("m64.bin");
    let o = sentigru(&[
        "train",
        "--config",
        s(&cfg),
        "--epochs",
        "2",
        "--out",
        s(&model),
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let history: Vec<serde_json::Value> = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("m64.history.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(history.len(), 2);
    assert_eq!(
        sentigru::model::read_precision(&model).unwrap(),
        sentigru::numerics::Dtype::F64
    );
    assert_eq!(
        sentigru(&["predict", "--model", s(&model), "--text", "gloomy"]).code,
        EXIT_OK
    );

    std::fs::write(&cfg, "epochs = 4\nflavour = mint\n").unwrap();
    assert_eq!(sentigru(&["train", "--config", s(&cfg)]).code, EXIT_USAGE);
}
