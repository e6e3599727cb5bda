use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_posecontrast");

const SMALL_CONFIG: &str = r#"{
  "split": { "train_count": 256, "val_count": 100, "support_per_unseen": 5 },
  "train": { "epochs": 2 }
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self { dir: tempfile::tempdir().unwrap() };
        fs::write(ws.path("config.json"), SMALL_CONFIG).unwrap();
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn generate(&self, name: &str, seed: &str) {
        let out = run(&["generate", "--config", &self.arg("config.json"), "--out", &self.arg(name), "--seed", seed]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }

    fn train(&self, ckpt: &str, extra: &[&str]) -> Output {
        let mut args = vec![
            "train".to_string(),
            "--config".into(),
            self.arg("config.json"),
            "--data".into(),
            self.arg("data.jsonl"),
            "--out-checkpoint".into(),
            self.arg(ckpt),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run(&refs)
    }
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn generate_is_byte_identical() {
    let ws = Workspace::new();
    ws.generate("a.jsonl", "3");
    ws.generate("b.jsonl", "3");
    ws.generate("c.jsonl", "4");
    assert_eq!(read(&ws.path("a.jsonl")), read(&ws.path("b.jsonl")));
    assert_ne!(read(&ws.path("a.jsonl")), read(&ws.path("c.jsonl")));
}

#[test]
fn train_eval_finetune_roundtrip() {
    let ws = Workspace::new();
    ws.generate("data.jsonl", "0");

    let out = ws.train("full.ckpt", &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let log = String::from_utf8(read(&ws.path("full.ckpt.log.csv"))).unwrap();
    assert!(log.starts_with("# tool=posecontrast version="));
    assert!(log.contains("seed=0 config_hash="));
    assert_eq!(log.lines().count(), 4);

    // Same command again, then a split run with a resume.
    assert_eq!(code(&ws.train("again.ckpt", &[])), 0);
    assert_eq!(code(&ws.train("half.ckpt", &["--stop-after-epochs", "1"])), 0);
    assert_eq!(code(&ws.train("resumed.ckpt", &["--resume", &ws.arg("half.ckpt")])), 0);
    let full = read(&ws.path("full.ckpt"));
    assert_eq!(full, read(&ws.path("again.ckpt")));
    assert_eq!(full, read(&ws.path("resumed.ckpt")));
    assert_eq!(log.as_bytes(), read(&ws.path("again.ckpt.log.csv")));

    let eval = |ckpt: &str, report: &str| {
        run(&[
            "eval",
            "--checkpoint",
            &ws.arg(ckpt),
            "--data",
            &ws.arg("data.jsonl"),
            "--report",
            &ws.arg(report),
            "--errors",
            &ws.arg(&format!("{report}.errors")),
            "--histogram",
            &ws.arg(&format!("{report}.hist")),
            "--embeddings",
            &ws.arg(&format!("{report}.emb")),
        ])
    };
    let out = eval("full.ckpt", "r1.csv");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Acc30"));
    assert_eq!(code(&eval("resumed.ckpt", "r2.csv")), 0);
    for suffix in ["", ".errors", ".hist", ".emb"] {
        let (a, b) = (format!("r1.csv{suffix}"), format!("r2.csv{suffix}"));
        assert_eq!(read(&ws.path(&a)), read(&ws.path(&b)), "{a}");
    }
    let emb = String::from_utf8(read(&ws.path("r1.csv.emb"))).unwrap();
    assert_eq!(emb.lines().count(), 1 + 1 + 100);

    let finetune = |shots: &str, out: &str| {
        run(&[
            "finetune",
            "--checkpoint",
            &ws.arg("full.ckpt"),
            "--data",
            &ws.arg("data.jsonl"),
            "--shots",
            shots,
            "--out",
            &ws.arg(out),
        ])
    };
    let out = finetune("0", "k0.ckpt");
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(read(&ws.path("k0.ckpt")), full);
    assert_eq!(code(&finetune("5", "k5.ckpt")), 0);
    assert_ne!(read(&ws.path("k5.ckpt")), full);
    let out = finetune("6", "k6.ckpt");
    assert_eq!(code(&out), 2);
    assert!(!ws.path("k6.ckpt").exists());
}

#[test]
fn user_errors_exit_with_two() {
    let ws = Workspace::new();
    ws.generate("data.jsonl", "0");
    assert_eq!(code(&ws.train("m.ckpt", &[])), 0);

    // Class 42 has no samples.
    let out = run(&["eval", "--checkpoint", &ws.arg("m.ckpt"), "--data", &ws.arg("data.jsonl"), "--classes", "42"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    fs::write(ws.path("bad.json"), r#"{"train": {"epochs": 0}}"#).unwrap();
    let out = run(&["generate", "--config", &ws.arg("bad.json"), "--out", &ws.arg("x.jsonl")]);
    assert_eq!(code(&out), 0, "generation does not read the train section");
    let out = run(&[
        "train",
        "--config",
        &ws.arg("bad.json"),
        "--data",
        &ws.arg("data.jsonl"),
        "--out-checkpoint",
        &ws.arg("bad.ckpt"),
    ]);
    assert_eq!(code(&out), 2);

    fs::write(ws.path("typo.json"), r#"{"train": {"epoch": 3}}"#).unwrap();
    let out = run(&["generate", "--config", &ws.arg("typo.json"), "--out", &ws.arg("y.jsonl")]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("train"));

    let out = run(&["eval", "--checkpoint", &ws.arg("missing.ckpt"), "--data", &ws.arg("data.jsonl")]);
    assert_eq!(code(&out), 2);
    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 2);
    let out = run(&["sweep", "--param", "momentum", "--values", "1", "--data", &ws.arg("data.jsonl"), "--out", &ws.arg("s.csv")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn gradcheck_reports_pass_and_injected_failure() {
    let out = run(&["gradcheck", "--instances", "5"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("overall: PASS"), "{text}");
    let out = run(&["gradcheck", "--instances", "2", "--inject-sign-flip"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("overall: FAIL"));
}

#[test]
fn sweep_writes_one_row_set_per_value() {
    let ws = Workspace::new();
    ws.generate("data.jsonl", "0");
    fs::write(ws.path("one.json"), r#"{"split": {"train_count": 256, "val_count": 100}, "train": {"epochs": 1}}"#)
        .unwrap();
    let out = run(&[
        "sweep",
        "--param",
        "tau",
        "--values",
        "0.1,0.5",
        "--config",
        &ws.arg("one.json"),
        "--data",
        &ws.arg("data.jsonl"),
        "--out",
        &ws.arg("sweep.csv"),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(read(&ws.path("sweep.csv"))).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| l.starts_with("tau,")).collect();
    assert_eq!(rows.len(), 6, "{csv}");
}
