use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ecmt::io::load_checkpoint;
use ecmt::textdata::{write_lines, SynthTranslation};

const TINY: &[&str] = &[
    "--set", "embed_dim=8",
    "--set", "hidden_dim=12",
    "--set", "bottleneck=4",
    "--set", "l_max=4",
    "--set", "k_train=3",
    "--set", "k_eval=3",
    "--set", "ec_batch=4",
    "--set", "eval_rounds=8",
    "--set", "eval_every=1",
    "--set", "batch=8",
    "--set", "epochs=1",
    "--set", "beam=2",
    "--set", "max_len=20",
];

macro_rules! args {
    ($($a:expr),* $(,)?) => { vec![$($a.to_string()),*] };
}

fn tiny() -> Vec<String> {
    TINY.iter().map(|s| s.to_string()).collect()
}

fn ecmt(args: &[String]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecmt")).args(args).output().unwrap()
}

fn ok(args: &[String]) -> serde_json::Value {
    let out = ecmt(args);
    assert!(
        out.status.success(),
        "{args:?}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    stdout.lines().last().map_or(serde_json::Value::Null, |l| {
        serde_json::from_str(l).unwrap_or(serde_json::Value::Null)
    })
}

fn error_of(args: &[String]) -> (i32, serde_json::Value) {
    let out = ecmt(args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().last().expect("diagnostic on stderr");
    (out.status.code().unwrap(), serde_json::from_str(line).expect("json diagnostic"))
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

struct Corpus {
    dir: tempfile::TempDir,
}

impl Corpus {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let synth = SynthTranslation {
            min_len: 3,
            max_len: 6,
            ..SynthTranslation::default()
        };
        let splits = synth.generate(&[40, 8, 8]).unwrap();
        for ((src, tgt), name) in splits.iter().zip(["train", "valid", "test"]) {
            write_lines(&dir.path().join(format!("{name}.src")), src).unwrap();
            write_lines(&dir.path().join(format!("{name}.tgt")), tgt).unwrap();
        }
        Corpus { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        s(&self.path(name))
    }

    fn tokenizers(&self) -> [u64; 2] {
        ["src", "tgt"].map(|side| {
            let v = ok(&args![
                "bpe-learn",
                "--input",
                self.arg(&format!("train.{side}")),
                "--out",
                self.arg(&format!("tok.{side}")),
                "--merges",
                "20",
            ]);
            v["vocab_size"].as_u64().unwrap()
        })
    }

    fn data_args(&self) -> Vec<String> {
        let mut a = Vec::new();
        for (flag, file) in [
            ("--src-tok", "tok.src"),
            ("--tgt-tok", "tok.tgt"),
            ("--train-src", "train.src"),
            ("--train-tgt", "train.tgt"),
            ("--valid-src", "valid.src"),
            ("--valid-tgt", "valid.tgt"),
            ("--test-src", "test.src"),
            ("--test-tgt", "test.tgt"),
        ] {
            a.push(flag.to_string());
            a.push(self.arg(file));
        }
        a
    }

    fn features(&self) {
        ok(&args![
            "features-synth",
            "--train-out",
            self.arg("f.train.ecfv"),
            "--valid-out",
            self.arg("f.valid.ecfv"),
            "--n-train",
            30,
            "--n-valid",
            10,
            "--dim",
            6,
            "--clusters",
            3,
        ]);
    }

    fn pretrain(&self, tok: &str, out: &str, steps: usize, seed: u64) -> serde_json::Value {
        let mut a = args![
            "ec-pretrain",
            "--train-features",
            self.arg("f.train.ecfv"),
            "--valid-features",
            self.arg("f.valid.ecfv"),
            "--tokenizer",
            self.arg(tok),
            "--out-dir",
            self.arg(out),
            "--steps",
            steps,
            "--seed",
            seed,
        ];
        a.extend(tiny());
        ok(&a)
    }
}

#[test]
fn zero_step_pretraining_writes_only_the_initial_checkpoint() {
    let c = Corpus::new();
    c.tokenizers();
    c.features();
    let v = c.pretrain("tok.src", "run0", 0, 3);
    assert_eq!(v["checkpoints"], 1);
    assert_eq!(v["final_step"], 0);
    let files: Vec<String> = std::fs::read_dir(c.path("run0"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".eckp"))
        .collect();
    assert_eq!(files, ["step_000000.eckp"]);
    let (params, meta) = load_checkpoint(&c.path("run0/step_000000.eckp")).unwrap();
    assert_eq!(meta.step, 0);
    assert!(params.len() > 0);
    let metrics = std::fs::read_to_string(c.path("run0/metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 1);
}

#[test]
fn pipeline_round_trip_and_bleu_scoring() {
    let c = Corpus::new();
    let [src_vocab, tgt_vocab] = c.tokenizers();
    c.features();
    c.pretrain("tok.src", "src_run", 2, 1);
    c.pretrain("tok.tgt", "tgt_run", 2, 2);

    let mut ft = args![
        "nmt-finetune",
        "--src-agent",
        c.arg("src_run/step_000002.eckp"),
        "--tgt-agent",
        c.arg("tgt_run/step_000002.eckp"),
        "--out",
        c.arg("model.eckp"),
        "--metrics",
        c.arg("ft.jsonl"),
        "--hyp-out",
        c.arg("ft.hyp"),
    ];
    ft.extend(c.data_args());
    ft.extend(tiny());
    let v = ok(&ft);
    assert_eq!(v["best_epoch"], 1);
    assert!(v["test_bleu"].is_number());
    assert_eq!(std::fs::read_to_string(c.path("ft.jsonl")).unwrap().lines().count(), 1);

    let translate = |src_tok: &str| {
        args![
            "translate",
            "--model",
            c.arg("model.eckp"),
            "--src-tok",
            c.arg(src_tok),
            "--tgt-tok",
            c.arg("tok.tgt"),
            "--input",
            c.arg("test.src"),
            "--output",
            c.arg("test.hyp"),
            "--beam",
            2,
            "--set",
            "max_len=20",
        ]
    };
    ok(&translate("tok.src"));
    let hyp = std::fs::read_to_string(c.path("test.hyp")).unwrap();
    assert_eq!(hyp.lines().count(), 8);
    assert_eq!(hyp, std::fs::read_to_string(c.path("ft.hyp")).unwrap());

    let same = ok(&args!["score-bleu", "--hyp", c.arg("test.tgt"), "--ref", c.arg("test.tgt")]);
    assert!((same["bleu"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    let scored = ok(&args!["score-bleu", "--hyp", c.arg("test.hyp"), "--ref", c.arg("test.tgt")]);
    assert!((scored["bleu"].as_f64().unwrap() - v["test_bleu"].as_f64().unwrap()).abs() < 1e-9);

    if src_vocab != tgt_vocab {
        let (code, e) = error_of(&translate("tok.tgt"));
        assert_eq!((code, e["error"].as_str().unwrap()), (1, "vocab_mismatch"));
    }
}

#[test]
fn bpe_apply_writes_segments_or_ids() {
    let c = Corpus::new();
    c.tokenizers();
    let base = args!["bpe-apply", "--tokenizer", c.arg("tok.src"), "--input", c.arg("test.src")];
    ok(&[base.clone(), args!["--output", c.arg("seg.txt")]].concat());
    ok(&[base, args!["--output", c.arg("ids.txt"), "--ids"]].concat());
    let seg = std::fs::read_to_string(c.path("seg.txt")).unwrap();
    let ids = std::fs::read_to_string(c.path("ids.txt")).unwrap();
    assert_eq!(seg.lines().count(), 8);
    for (a, b) in seg.lines().zip(ids.lines()) {
        assert_eq!(a.split_whitespace().count(), b.split_whitespace().count());
        assert!(b.split_whitespace().all(|t| t.parse::<usize>().is_ok()));
    }
}

#[test]
fn failures_exit_with_json_diagnostics() {
    let c = Corpus::new();
    let kind = |a: Vec<String>| {
        let (code, v) = error_of(&a);
        (code, v["error"].as_str().unwrap().to_string(), v["message"].as_str().unwrap().to_string())
    };

    let (code, k, _) = kind(args!["score-bleu", "--hyp", c.arg("nope"), "--ref", c.arg("test.tgt")]);
    assert_eq!((code, k.as_str()), (1, "missing_file"));

    let (code, k, _) = kind(args!["score-bleu", "--hyp", c.arg("train.tgt"), "--ref", c.arg("test.tgt")]);
    assert_eq!((code, k.as_str()), (1, "invalid_argument"));

    let (code, k, _) = kind(args!["bpe-learn", "--input", c.arg("train.src"), "--out", "x", "--set", "bogus=1"]);
    assert_eq!((code, k.as_str()), (1, "config"));

    std::fs::write(c.path("run.cfg"), "alpha = 2\nalpha = 3\n").unwrap();
    let (code, _, msg) = kind(args![
        "bpe-learn",
        "--input",
        c.arg("train.src"),
        "--out",
        "x",
        "--config",
        c.arg("run.cfg")
    ]);
    assert_eq!(code, 1);
    assert!(msg.contains("line 2"), "{msg}");

    std::fs::write(c.path("bad.ecfv"), b"ECFV\x01").unwrap();
    let (code, k, _) = kind(args![
        "ec-pretrain",
        "--train-features",
        c.arg("bad.ecfv"),
        "--valid-features",
        c.arg("bad.ecfv"),
        "--vocab-size",
        10,
        "--out-dir",
        c.arg("r"),
    ]);
    assert_eq!((code, k.as_str()), (1, "malformed_format"));

    let (code, k, _) = kind(args!["translate", "--model"]);
    assert_eq!((code, k.as_str()), (1, "usage"));

    std::fs::create_dir(c.path("a_dir")).unwrap();
    let (code, k, _) = kind(args![
        "features-synth",
        "--train-out",
        c.arg("a_dir"),
        "--valid-out",
        c.arg("v.ecfv"),
        "--n-train",
        5,
        "--n-valid",
        5,
    ]);
    assert_eq!((code, k.as_str()), (2, "io"));
}
