use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lbnet_core::curation::{read_manifest, RecordStatus, RejectReason};
use lbnet_core::mesh::{save_mesh, shapes, MeshFormat};

fn lbnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lbnet")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lbnet(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_off(dir: &Path, name: &str, mesh: &lbnet_core::TriMesh) -> PathBuf {
    let p = dir.join(format!("{name}.off"));
    save_mesh(mesh, &p, MeshFormat::Off).unwrap();
    p
}

#[test]
fn help_mentions_every_flag() {
    let mut root = lbnet_cli::command();
    root.build();
    for sub in root.get_subcommands() {
        let mut sub = sub.clone();
        let help = sub.render_long_help().to_string();
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(help.contains(&format!("--{long}")), "{} help lacks --{long}", sub.get_name());
            }
        }
    }
    let out = lbnet(&["train", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--schedule"));
}

#[test]
fn spectrum_of_a_tetrahedron() {
    let dir = tempfile::tempdir().unwrap();
    let tetra = write_off(dir.path(), "tetra", &shapes::tetrahedron(1.0));
    let text = ok(&["spectrum", "--k", "50", path(&tetra)]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["id"], "tetra");
    // four vertices leave room for three eigenvalues
    assert_eq!(v["k"], 3);
    let eig: Vec<f64> = v["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(eig[0].abs() < 1e-10 && eig[1] > 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lbnet(&["spectrum", "--bogus", "x.off"]).status.code(), Some(2));
    assert_eq!(lbnet(&["inspect"]).status.code(), Some(2));
    assert_eq!(lbnet(&["-v", "-q", "inspect", "x.off"]).status.code(), Some(2));

    let broken = dir.path().join("broken.off");
    std::fs::write(&broken, "OFF\n3 1 0\n0 0 0\n").unwrap();
    let out = lbnet(&["inspect", path(&broken)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh.parse"));

    let missing = dir.path().join("missing.off");
    assert_eq!(lbnet(&["inspect", path(&missing)]).status.code(), Some(5));

    // two corners at the same point: a zero-length edge
    let squashed = dir.path().join("squashed.off");
    std::fs::write(&squashed, "OFF\n4 4 0\n0 0 0\n0 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n").unwrap();
    let out = lbnet(&["features", path(&squashed)]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn curate_three_fixtures() {
    let corpus = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write_off(corpus.path(), "tetra", &shapes::tetrahedron(1.0));
    write_off(corpus.path(), "disk", &shapes::disk(1.0, 10, 3));
    write_off(corpus.path(), "torus", &shapes::torus(1.0, 0.35, 32, 14));
    let manifest = out.path().join("manifest.jsonl");
    let args = [
        "curate",
        "--in",
        path(corpus.path()),
        "--out",
        path(&manifest),
        "--min-vertices",
        "400",
        "--max-vertices",
        "600",
        "--k",
        "10",
        "--rotations",
        "1",
    ];
    let summary: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(summary["accepted"], 2);
    assert_eq!(summary["rejected"]["BOUNDARY"], 1);
    let records = read_manifest(&manifest).unwrap();
    let disk = records.iter().find(|r| r.id == "disk").unwrap();
    assert_eq!((disk.status, disk.reason), (RecordStatus::Rejected, Some(RejectReason::Boundary)));

    let before = std::fs::read(&manifest).unwrap();
    let again: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(again["processed"], 0);
    assert_eq!(std::fs::read(&manifest).unwrap(), before);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    ok(&["--config", path(&cfg), "synth", "--out", path(&a), "--classes", "box", "--per-class", "1", "--k", "4"]);
    ok(&["--seed", "5", "synth", "--out", path(&b), "--classes", "box", "--per-class", "1", "--k", "4"]);
    ok(&["--config", path(&cfg), "--seed", "6", "synth", "--out", path(&c), "--classes", "box", "--per-class", "1", "--k", "4"]);
    let read = |d: &Path| std::fs::read_to_string(d.join("labels.jsonl")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));

    std::fs::write(&cfg, "sed = 5\n").unwrap();
    let out = lbnet(&["--config", path(&cfg), "synth", "--out", path(&a)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn synth_train_predict_eval_bench() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let synth = ["--seed", "3", "--threads", "1", "synth", "--out", path(&data), "--per-class", "2", "--k", "10"];
    ok(&synth);
    let labels = std::fs::read(data.join("labels.jsonl")).unwrap();
    assert_eq!(String::from_utf8_lossy(&labels).lines().count(), 20);

    let train = |out: &Path| {
        ok(&[
            "--seed",
            "3",
            "train",
            "--data",
            path(&data),
            "--out",
            path(out),
            "--preset",
            "desk",
            "--schedule",
            "2:1e-3,1:1e-4",
            "--checkpoint-every",
            "2",
        ])
    };
    let run1 = dir.path().join("run1");
    let run2 = dir.path().join("run2");
    let summary: serde_json::Value = serde_json::from_str(&train(&run1)).unwrap();
    assert_eq!(summary["epochs"], 3);
    train(&run2);
    for f in ["model.json", "history.csv", "checkpoints/epoch_00002.json"] {
        assert_eq!(std::fs::read(run1.join(f)).unwrap(), std::fs::read(run2.join(f)).unwrap(), "{f}");
    }
    let history = std::fs::read_to_string(run1.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);

    // identical inputs, identical artifacts
    ok(&synth);
    assert_eq!(std::fs::read(data.join("labels.jsonl")).unwrap(), labels);

    let model = run1.join("model.json");
    let mesh = write_off(dir.path(), "ball", &lbnet_core::mesh::scale(&shapes::icosphere(1.0, 2), 3.0));
    let line = ok(&["predict", path(&model), path(&mesh)]);
    let p: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    let norm = p["eigenvalues"].as_array().unwrap();
    let restored = p["restored"].as_array().unwrap();
    assert_eq!((norm.len(), restored.len()), (10, 10));
    let s = p["scale_factor"].as_f64().unwrap();
    assert!((s - 1.0 / 6.0).abs() < 1e-3, "{s}");
    assert!((restored[0].as_f64().unwrap() - norm[0].as_f64().unwrap() * s * s).abs() < 1e-12);

    let eval_dir = dir.path().join("eval");
    let agg: serde_json::Value =
        serde_json::from_str(&ok(&["eval", path(&model), "--data", path(&data), "--split", "all", "--out", path(&eval_dir)]))
            .unwrap();
    assert_eq!(agg["aggregate"]["samples"], 20);
    for f in ["samples.csv", "summary.json", "histogram.csv"] {
        assert!(eval_dir.join(f).exists(), "{f}");
    }

    let timing: serde_json::Value =
        serde_json::from_str(&ok(&["bench", path(&model), path(&mesh), "--k", "10", "--repeats", "1"])).unwrap();
    assert_eq!(timing["rows"].as_array().unwrap().len(), 1);
    assert!(timing["note"].as_str().unwrap().contains("feature extraction"));
}
