use std::path::Path;
use std::process::{Command, Output};

fn dripmon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dripmon"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn dripmon")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&dripmon(&[])), 1);
    assert_eq!(code(&dripmon(&["no-such-command"])), 1);
    assert_eq!(code(&dripmon(&["run"])), 1);
    assert_eq!(code(&dripmon(&["gen-dataset", "--count", "10"])), 1);
    assert_eq!(code(&dripmon(&["--help"])), 0);
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{ nope").unwrap();
    let out = dripmon(&["run", "--config", path(&cfg)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    std::fs::write(
        &cfg,
        r#"{"model":{"weights":"missing.drpw"},"streams":[{"stream_id":"a","fps":30,"transport":"ppm_dir","path":"x"}],"output":{"dir":"out"}}"#,
    )
    .unwrap();
    assert_eq!(code(&dripmon(&["run", "--config", path(&cfg)])), 1);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn runtime_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = dripmon(&["gen-dataset", "--count", "4", "--size", "32", "--grid", "4", "--out", path(&blocker.join("sub"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn end_to_end_small() {
    let dir = tempfile::tempdir().unwrap();
    let d = |p: &str| dir.path().join(p);

    let out = dripmon(&["gen-dataset", "--count", "24", "--size", "32", "--grid", "4", "--seed", "3", "--out", path(&d("data"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(d("data/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 24);
    assert!(manifest.lines().next().unwrap().contains("\"W\":32"));

    let train_cfg = d("train.json");
    std::fs::write(
        &train_cfg,
        r#"{"net":{"input_size":32,"grid_size":4,"layers":[
            {"type":"conv","kernel":5,"in_channels":3,"out_channels":4},{"type":"batch_norm"},{"type":"leaky_relu"},{"type":"max_pool"},
            {"type":"conv","kernel":5,"in_channels":4,"out_channels":4},{"type":"batch_norm"},{"type":"leaky_relu"},{"type":"max_pool"},
            {"type":"max_pool"},{"type":"conv","kernel":1,"in_channels":4,"out_channels":2},{"type":"sigmoid"}],
            "seed":1,"bn_epsilon":1e-5,"bn_momentum":0.1},
            "train":{"epochs":2,"batch_size":8}}"#,
    )
    .unwrap();
    let out = dripmon(&["train", "--config", path(&train_cfg), "--data", path(&d("data")), "--out", path(&d("model"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let history = std::fs::read_to_string(d("model/history.csv")).unwrap();
    assert_eq!(history.lines().next().unwrap(), "epoch,train_loss,val_loss,val_state_acc");
    assert_eq!(history.lines().count(), 3);
    let weights = d("model/weights.drpw");
    assert_eq!(&std::fs::read(&weights).unwrap()[..4], b"DRPW");

    let out = dripmon(&["eval", "--weights", path(&weights), "--data", path(&d("data")), "--out", path(&d("eval"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("state_accuracy"));

    let out = dripmon(&["gen-stream", "--duration", "3", "--period", "1", "--size", "32", "--seed", "2", "--out", path(&d("stream"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(d("stream/detach.jsonl")).unwrap().lines().count(), 3);
    let truth = std::fs::read_to_string(d("stream/truth.jsonl")).unwrap();
    assert_eq!(truth.lines().count(), 105);
    assert_eq!(&std::fs::read(d("stream/stream.drpv")).unwrap()[..4], b"DRPV");

    let run_cfg = d("run.json");
    std::fs::write(
        &run_cfg,
        r#"{"model":{"weights":"model/weights.drpw"},
            "streams":[{"stream_id":"bed1","transport":"container","path":"stream/stream.drpv"}],
            "counter":{"tau":0.3,"debounce_m":2,"window_n":3,"margin_cells":1},
            "output":{"dir":"run"},"batch":{"frames_per_stream":4}}"#,
    )
    .unwrap();
    let out = dripmon(&["run", "--config", path(&run_cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bed1: 105 frames"));
    for f in ["events.jsonl", "flow.csv", "report.json"] {
        assert!(d("run").join(f).exists());
    }

    let bench_cfg = d("bench.json");
    std::fs::write(&bench_cfg, r#"{"frames":8,"repetitions":1,"raw_width":48,"raw_height":32}"#).unwrap();
    let out = dripmon(&["bench", "--weights", path(&weights), "--config", path(&bench_cfg), "--out", path(&d("bench"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d("bench/report.json")).unwrap()).unwrap();
    let sizes: Vec<u64> = report["reports"].as_array().unwrap().iter().map(|r| r["batch_size"].as_u64().unwrap()).collect();
    assert_eq!(sizes, vec![1, 2, 4, 8]);

    let out = dripmon(&["heatmap", "--weights", path(&weights), "--frame", path(&d("data/000000.ppm")), "--out", path(&d("heat"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for k in ["000000_k0.pgm", "000000_k1.pgm"] {
        assert_eq!(&std::fs::read(d("heat").join(k)).unwrap()[..2], b"P5");
    }
}
