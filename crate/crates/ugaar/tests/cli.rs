use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ugaar::artifacts::{Checkpoint, ReportFile};
use ugaar::features::load_dataset;
use ugaar_core::eval::evaluate_all;
use ugaar_core::pipeline::split_dataset;

fn ugaar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ugaar"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMALL: &str = r#"{
  "synth": {"n": 150, "latent_dim": 3, "audio_dim": 12, "sheet_dim": 10, "lyrics_dim": 8},
  "experiment": {"train": {"common_dim": 8, "hidden_dim": 16, "projection_dim": 6,
                           "batch_size": 16, "epochs": 4, "lr_g": 0.001, "lr_d": 0.001,
                           "validation_every": 2}}
}"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.in.json");
    fs::write(&p, body).unwrap();
    p
}

fn read(p: PathBuf) -> Vec<u8> {
    fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn synth_writes_loadable_reproducible_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, SMALL);
    for out in ["a", "b"] {
        let o = ugaar(d, &["synth", "--config", "config.in.json", "--out", out, "--seed", "4"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["audio.txt", "sheet.txt", "lyrics.txt", "manifest.json"] {
        assert_eq!(read(d.join("a").join(f)), read(d.join("b").join(f)), "{f}");
    }
    let data = load_dataset(&d.join("a/manifest.json")).unwrap();
    assert_eq!((data.len(), data.audio().dim()), (150, 12));
    let echoed = String::from_utf8(read(d.join("a/config.json"))).unwrap();
    assert!(echoed.contains("\"seed\": 4") && echoed.contains("\"noise_sigma\""));

    let o = ugaar(d, &["synth", "--config", "config.in.json", "--out", "c", "--seed", "5"]);
    assert_eq!(code(&o), 0);
    assert_ne!(read(d.join("a/audio.txt")), read(d.join("c/audio.txt")));
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, r#"{"synth": {"n": 10, "nosie_sigma": 1.0}}"#);
    let o = ugaar(d, &["synth", "--config", "config.in.json", "--out", "x"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nosie_sigma"), "{}", stderr(&o));

    let o = ugaar(d, &["synth", "--config", "missing.json"]);
    assert_eq!(code(&o), 2);

    fs::write(d.join("blocker"), "").unwrap();
    let o = ugaar(d, &["synth", "--out", "blocker/sub"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let o = ugaar(d, &["train", "--variant", "gan"]);
    assert_eq!(code(&o), 2);

    write_config(d, r#"{"experiment": {"train": {"batch_size": 1}}}"#);
    let o = ugaar(d, &["train", "--config", "config.in.json", "--out", "y"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn train_eval_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, SMALL);
    let o = ugaar(d, &["train", "--config", "config.in.json", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run = d.join("run");
    for f in [
        "checkpoint.json",
        "history.jsonl",
        "report.json",
        "report.md",
        "config.json",
        "cca.json",
        "pairs.json",
    ] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let history = String::from_utf8(read(run.join("history.jsonl"))).unwrap();
    assert_eq!(history.lines().count(), 4);

    // Same seed, same bytes.
    let o = ugaar(d, &["train", "--config", "config.in.json", "--out", "rerun"]);
    assert_eq!(code(&o), 0);
    for f in ["report.json", "report.md", "checkpoint.json", "history.jsonl"] {
        assert_eq!(read(run.join(f)), read(d.join("rerun").join(f)), "{f}");
    }

    // eval against the checkpoint's own data matches a direct library call.
    let o = ugaar(d, &["eval", "--config", "run/config.json", "--out", "ev"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: ReportFile = serde_json::from_slice(&read(d.join("ev/report.json"))).unwrap();
    let ckpt = Checkpoint::load(&run.join("checkpoint.json")).unwrap();
    let data = load_dataset(&run.join("data/manifest.json")).unwrap();
    let test = split_dataset(&ckpt.config, &data).unwrap().test;
    assert_eq!(report.model, evaluate_all(&ckpt.generator, &test, "ugaar").unwrap());
    let trained: ReportFile = serde_json::from_slice(&read(run.join("report.json"))).unwrap();
    assert_eq!(report, trained);

    let md = String::from_utf8(read(d.join("ev/report.md"))).unwrap();
    assert_eq!(md.matches("## ").count(), 6);
    assert_eq!(md.matches("| RANDOM |").count(), 6);

    let o = ugaar(
        d,
        &["report", "--history", "run/history.jsonl", "--out", "plots/loss.svg"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    roxmltree::Document::parse(&String::from_utf8(read(d.join("plots/loss.svg"))).unwrap()).unwrap();
}

#[test]
fn every_variant_trains_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, SMALL);
    for variant in ["baseline", "baseline-gan"] {
        let o = ugaar(
            d,
            &[
                "train",
                "--config",
                "config.in.json",
                "--out",
                variant,
                "--variant",
                variant,
            ],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let report: ReportFile = serde_json::from_slice(&read(d.join(variant).join("report.json"))).unwrap();
        assert_eq!(report.model.model, variant);
    }
    let ckpt = Checkpoint::load(&d.join("baseline/checkpoint.json")).unwrap();
    assert!(ckpt.discriminator.is_none());
}

#[test]
fn zero_epochs_still_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, &SMALL.replace("\"epochs\": 4", "\"epochs\": 0"));
    let o = ugaar(d, &["train", "--config", "config.in.json", "--out", "untrained"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: ReportFile = serde_json::from_slice(&read(d.join("untrained/report.json"))).unwrap();
    assert_eq!(report.model.directions.len(), 6);
    assert!(read(d.join("untrained/history.jsonl")).is_empty());
    let o = ugaar(d, &["report", "--history", "untrained/history.jsonl"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_checkpoints_and_mismatched_data_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_config(d, &SMALL.replace("\"epochs\": 4", "\"epochs\": 1"));
    assert_eq!(
        code(&ugaar(d, &["train", "--config", "config.in.json", "--out", "run"])),
        0
    );

    fs::write(d.join("corrupt.json"), "{\"generator\": [1, 2").unwrap();
    let o = ugaar(
        d,
        &[
            "eval",
            "--config",
            "run/config.json",
            "--checkpoint",
            "corrupt.json",
            "--out",
            "e1",
        ],
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    // Structurally valid JSON whose layers do not chain.
    let text = String::from_utf8(read(d.join("run/checkpoint.json"))).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["generator"]["audio_branch"]["layers"][1]["bias"] = serde_json::json!([0.0]);
    fs::write(d.join("broken.json"), v.to_string()).unwrap();
    let o = ugaar(
        d,
        &[
            "eval",
            "--config",
            "run/config.json",
            "--checkpoint",
            "broken.json",
            "--out",
            "e2",
        ],
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    let o = ugaar(d, &["synth", "--out", "other", "--config", "config.in.json"]);
    assert_eq!(code(&o), 0);
    write_config(
        d,
        r#"{"synth": {"n": 40, "latent_dim": 2, "audio_dim": 5, "sheet_dim": 4, "lyrics_dim": 3}}"#,
    );
    assert_eq!(
        code(&ugaar(d, &["synth", "--config", "config.in.json", "--out", "narrow"])),
        0
    );
    let o = ugaar(
        d,
        &[
            "eval",
            "--config",
            "run/config.json",
            "--manifest",
            "narrow/manifest.json",
            "--out",
            "e3",
        ],
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("dims"), "{}", stderr(&o));

    let o = ugaar(
        d,
        &[
            "eval",
            "--config",
            "run/config.json",
            "--manifest",
            "other/manifest.json",
            "--out",
            "e4",
            "--all",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let all: ReportFile = serde_json::from_slice(&read(d.join("e4/report.json"))).unwrap();
    assert_eq!(all.model.n, 150);
}
