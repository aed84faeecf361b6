use std::fs;
use std::path::Path;
use std::process::Command;

use ndarray::Array2;
use swift_cli::checkpoint::{Checkpoint, SavedRun};
use swift_cli::commands::{cmd_analyze, cmd_count, cmd_eval, cmd_predict, cmd_synth, cmd_train, count_kv, CHECKPOINT_FILE};
use swift_cli::config::RunConfig;
use swift_core::data::{load_csv, Scaler, SynthParams};
use swift_core::model::{init_model, ModelConfig, NormMode};

fn write_config(dir: &Path, data: &Path, extra: &str) -> std::path::PathBuf {
    let text = format!(
        "data.path={}\ndata.split_scheme=ratio\nmodel.lookback=32\nmodel.horizon=16\nout.dir={}\n\
         train.epochs=2\ntrain.batch_size=32\n{extra}",
        data.display(),
        dir.join("run").display()
    );
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn synth_file(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("synth.csv");
    cmd_synth(1200, 3, &SynthParams::default(), &p, &mut Vec::new()).unwrap();
    p
}

fn train_in(dir: &Path, extra: &str) -> (RunConfig, swift_cli::commands::TrainReport) {
    let data = synth_file(dir);
    let cfg = RunConfig::load(&write_config(dir, &data, extra), &[]).unwrap();
    let report = cmd_train(&cfg, &mut Vec::new()).unwrap();
    (cfg, report)
}

#[test]
fn synth_output_loads_with_requested_length() {
    let dir = tempfile::tempdir().unwrap();
    let p = synth_file(dir.path());
    let s = load_csv(&p).unwrap();
    assert_eq!((s.channels(), s.len()), (1, 1200));
}

#[test]
fn repeated_training_gives_identical_checkpoints() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, ra) = train_in(a.path(), "");
    let data_b = b.path().join("synth.csv");
    fs::copy(a.path().join("synth.csv"), &data_b).unwrap();
    // same data path so the stored configuration matches too
    let cfg = RunConfig::load(&write_config(a.path(), &a.path().join("synth.csv"), ""), &[]).unwrap();
    let again = RunConfig {
        out_dir: b.path().join("run"),
        ..cfg.clone()
    };
    let rb = cmd_train(&again, &mut Vec::new()).unwrap();
    let strip_out = |p: &Path| {
        let mut s = SavedRun::load(p).unwrap();
        s.run.out_dir = "x".into();
        s.to_checkpoint().to_bytes()
    };
    assert_eq!(strip_out(&ra.checkpoint), strip_out(&rb.checkpoint));
    let rerun = cmd_train(&cfg, &mut Vec::new()).unwrap();
    assert_eq!(fs::read(&rerun.checkpoint).unwrap(), fs::read(&ra.checkpoint).unwrap());
}

#[test]
fn eval_reproduces_training_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = train_in(dir.path(), "model.norm=revin\n");
    let mut out1 = Vec::new();
    let res = cmd_eval(&report.checkpoint, &[], &mut out1).unwrap();
    assert_eq!(res[1].1, report.test);
    assert_eq!(res[0].1, report.val);
    let mut out2 = Vec::new();
    cmd_eval(&report.checkpoint, &[], &mut out2).unwrap();
    assert_eq!(out1, out2);
    assert!(cmd_eval(&report.checkpoint, &["model.lookback=8".into()], &mut Vec::new()).is_err());
}

#[test]
fn corrupted_checkpoint_fails_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = train_in(dir.path(), "");
    let mut bytes = fs::read(&report.checkpoint).unwrap();
    let mid = bytes.len() - 100;
    bytes[mid] ^= 1;
    let bad = dir.path().join("bad.swft");
    fs::write(&bad, bytes).unwrap();
    let e = cmd_eval(&bad, &[], &mut Vec::new()).unwrap_err();
    assert!(e.render().starts_with("swift: error[checkpoint]: checksum mismatch"), "{}", e.render());
}

#[test]
fn training_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, report) = train_in(dir.path(), "");
    for f in [CHECKPOINT_FILE, "history.csv", "stats.csv", "summary.txt", "config.txt"] {
        assert!(cfg.out_dir.join(f).exists(), "{f}");
    }
    let history = fs::read_to_string(cfg.out_dir.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_mse,val_mse,lr\n"));
    assert_eq!(history.lines().count(), 1 + report.history.epochs.len());
    let stats = Scaler::read_csv(cfg.out_dir.join("stats.csv")).unwrap();
    assert_eq!(stats, SavedRun::load(&report.checkpoint).unwrap().scaler);
}

fn identity_checkpoint(dir: &Path, channels: usize, t: usize) -> std::path::PathBuf {
    let mut cfg = ModelConfig::new(t, t, channels);
    cfg.norm = NormMode::None;
    cfg.conv = false;
    let mut model = init_model(&cfg, 0).unwrap();
    for h in &mut model.params_mut().heads {
        h.out.weight = Array2::eye(t / 2);
    }
    let run = RunConfig::parse(&format!(
        "data.path=unused.csv\ndata.split_scheme=ratio\nmodel.lookback={t}\nmodel.horizon={t}\nout.dir=o\n"
    ))
    .unwrap();
    let saved = SavedRun {
        run,
        model,
        scaler: Scaler {
            channel_names: (0..channels).map(|c| format!("c{c}")).collect(),
            mean: (0..channels).map(|c| c as f64 * 3.0 - 1.0).collect(),
            std: (0..channels).map(|c| 0.5 + c as f64).collect(),
        },
        state: Default::default(),
    };
    let p = dir.join("identity.swft");
    saved.save(&p).unwrap();
    p
}

#[test]
fn identity_checkpoint_predicts_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = identity_checkpoint(dir.path(), 2, 8);
    let input = dir.path().join("in.csv");
    let mut text = String::from("date,c0,c1\n");
    for t in 0..20 {
        text.push_str(&format!("d{t},{},{}\n", (t as f64 * 0.7).sin() * 5.0, t as f64 * 1.25 - 3.0));
    }
    fs::write(&input, text).unwrap();
    let output = dir.path().join("out.csv");
    cmd_predict(&ckpt, &input, &output, &mut Vec::new()).unwrap();
    let raw = load_csv(&input).unwrap();
    let pred = load_csv(&output).unwrap();
    assert_eq!((pred.channels(), pred.len()), (2, 8));
    for c in 0..2 {
        for t in 0..8 {
            assert!((pred.values[[c, t]] - raw.values[[c, 12 + t]]).abs() < 1e-8);
        }
    }
}

#[test]
fn short_and_mismatched_prediction_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = identity_checkpoint(dir.path(), 2, 8);
    let short = dir.path().join("short.csv");
    fs::write(&short, "a,b\n1,2\n3,4\n").unwrap();
    let e = cmd_predict(&ckpt, &short, &dir.path().join("o.csv"), &mut Vec::new()).unwrap_err();
    assert!(e.to_string().contains("short input"), "{e}");
    let wide = dir.path().join("wide.csv");
    fs::write(&wide, "a,b,c\n1,2,3\n").unwrap();
    let e = cmd_predict(&ckpt, &wide, &dir.path().join("o.csv"), &mut Vec::new()).unwrap_err();
    assert_eq!(e.kind(), "config");
}

#[test]
fn analyze_identical_and_mismatched() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, share) = train_in(dir.path(), "");
    let mut out = Vec::new();
    let r = cmd_analyze(&share.checkpoint, &share.checkpoint, &dir.path().join("an"), &mut out).unwrap();
    assert!((r.sim_shared_low - 1.0).abs() < 1e-12);
    assert!((r.fit.beta_low - 1.0).abs() < 1e-12);
    assert!(r.high_degenerate);
    for f in ["report.csv", "shared.pgm", "shared.csv", "low.pgm", "high.pgm"] {
        assert!(dir.path().join("an").join(f).exists(), "{f}");
    }

    let other = RunConfig {
        out_dir: dir.path().join("run8"),
        model: ModelConfig {
            horizon: 8,
            ..cfg.model.clone()
        },
        ..cfg
    };
    let short = cmd_train(&other, &mut Vec::new()).unwrap();
    let e = cmd_analyze(&share.checkpoint, &short.checkpoint, &dir.path().join("an2"), &mut Vec::new()).unwrap_err();
    assert_eq!(e.kind(), "config");
}

#[test]
fn split_head_adds_one_weight_copy() {
    let base = ["model.lookback=720", "model.horizon=96", "model.channels=321", "model.norm=revin"];
    let mut args: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    let (share, _) = cmd_count(count_kv(None, &args).unwrap(), &mut Vec::new()).unwrap();
    args.push("model.head_mode=split".into());
    let (split, _) = cmd_count(count_kv(None, &args).unwrap(), &mut Vec::new()).unwrap();
    assert_eq!(split - share, 360 * 48 + 48);
}

#[test]
fn checkpoint_header_is_readable() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = train_in(dir.path(), "");
    let c = Checkpoint::load(&report.checkpoint).unwrap();
    assert!(c.config.contains("model.lookback=32\n"));
    assert!(c.tensors.iter().any(|t| t.name == "head.shared.weight" && t.dims == [16, 8]));
}

fn swift(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_swift"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

#[test]
fn binary_reports_single_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "data.path=x.csv\ndata.split_scheme=ratio\nmodel.horizon=96\nout.dir=o\n").unwrap();
    let out = swift(&["train", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("swift: error[config]:") && err.contains("model.lookback"), "{err}");

    let out = swift(&["eval", dir.path().join("nope.swft").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("swift: error[io]:"));

    let out = swift(&["train"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("swift: error[usage]:"));
}

#[test]
fn binary_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.csv");
    let out = swift(&["synth", data.to_str().unwrap(), "--len", "900", "--seed", "5"]);
    assert!(out.status.success());
    let cfg = write_config(dir.path(), &data, "");
    let out = Command::new(env!("CARGO_BIN_EXE_swift"))
        .args(["train", cfg.to_str().unwrap(), "--set", "train.epochs=1"])
        .env("SWIFT_THREADS", "2")
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    assert!(line.starts_with("test_mse="), "{line}");
    let ckpt = dir.path().join("run").join(CHECKPOINT_FILE);
    let out = swift(&["eval", ckpt.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("split=test mse="), "{text}");
    let pred = dir.path().join("p.csv");
    let out = swift(&["predict", ckpt.to_str().unwrap(), data.to_str().unwrap(), pred.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(load_csv(&pred).unwrap().len(), 16);
}
