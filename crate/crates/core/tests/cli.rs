use std::path::Path;
use std::process::{Command, Output};

use majoring::cover::{CoverMode, MajoringPoint, MajoringPointSet};
use majoring::geometry::{Domain, Point};
use majoring::network::{model_load, model_save, verify_samples, MonotoneMlp, SavedModel};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_majoring"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

/// A constant network on [0, 1] at `level`, without a report.
fn constant_model(level: f64) -> SavedModel {
    let mut net = MonotoneMlp::init(1, 1, 4, 1.0, 0).unwrap();
    let zeros = vec![0.0; net.param_count()];
    let mut mlp = net.into_mlp();
    mlp.set_params_flat(&zeros).unwrap();
    net = MonotoneMlp::try_from_mlp(mlp).unwrap();
    net.shift_output_bias(level);
    SavedModel::monotone(net, Some(Domain::cube(1, 0.0, 1.0).unwrap()), None)
}

fn write_points(path: &Path, bs: &[f64]) {
    let pts = bs
        .iter()
        .enumerate()
        .map(|(i, &b)| MajoringPoint {
            a: Point::new(vec![i as f64 / bs.len() as f64]).unwrap(),
            b,
        })
        .collect();
    MajoringPointSet::new(1, pts, CoverMode::Grid).unwrap().save(path).unwrap();
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let o = cli(dir.path(), &["gen-data", "--function", "f1", "--n", "500", "--seed", "3", "--out", name]);
        assert!(o.status.success(), "{}", text(&o));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 501);

    let o = cli(dir.path(), &["gen-data", "--function", "f1", "--n", "0", "--out", "c.csv"]);
    assert!(!o.status.success());
    let o = cli(dir.path(), &["gen-data", "--function", "nope", "--n", "5", "--out", "c.csv"]);
    assert!(!o.status.success());
}

#[test]
fn cover_and_points_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["cover", "--function", "f1", "--eps", "0.1", "--out", "grid.json"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("200 cells"));
    let o = cli(dir.path(), &["points", "--cover", "grid.json", "--function", "f1", "--out", "p.csv"]);
    assert!(o.status.success(), "{}", text(&o));
    let pts = MajoringPointSet::load(dir.path().join("p.csv"), CoverMode::Grid).unwrap();
    assert_eq!(pts.len(), 200);

    let o = cli(
        dir.path(),
        &["cover", "--function", "g2d", "--mode", "function-adapted", "--eps", "0.1", "--eps-f", "2", "--out", "a.json"],
    );
    assert!(text(&o).contains("2605 cells"), "{}", text(&o));

    cli(dir.path(), &["gen-data", "--function", "f1", "--n", "500", "--out", "d.csv"]);
    let o = cli(
        dir.path(),
        &[
            "cover", "--data", "d.csv", "--domain", "-10..10", "--mode", "data-adapted", "--eps", "0.1", "--eps-f", "1",
            "--np", "2", "--out", "dc.json",
        ],
    );
    assert!(o.status.success(), "{}", text(&o));
    let o = cli(dir.path(), &["points", "--cover", "dc.json", "--data", "d.csv", "--out", "dp.csv"]);
    assert!(o.status.success(), "{}", text(&o));
    assert!(text(&o).contains("dropped"));

    // adaptive mode without its parameters
    let o = cli(dir.path(), &["cover", "--function", "f1", "--mode", "function-adapted", "--out", "x.json"]);
    assert!(!o.status.success());
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_points(&dir.path().join("p.csv"), &[0.0, 1.0, 2.0]);
    model_save(&constant_model(2.0), dir.path().join("good.json")).unwrap();
    model_save(&constant_model(1.5), dir.path().join("bad.json")).unwrap();

    let o = cli(dir.path(), &["verify", "--model", "good.json", "--points", "p.csv"]);
    assert!(o.status.success(), "{}", text(&o));
    let saved = model_load(dir.path().join("good.json")).unwrap();
    assert!(saved.is_certified(), "report embedded in the model file");

    let o = cli(dir.path(), &["verify", "--model", "bad.json", "--points", "p.csv"]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    assert!(!model_load(dir.path().join("bad.json")).unwrap().is_certified());
}

#[test]
fn predict_refusals() {
    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("p.csv");
    write_points(&points, &[0.0, 1.0]);
    let unverified = constant_model(3.0);
    model_save(&unverified, dir.path().join("raw.json")).unwrap();
    let mut verified = unverified.clone();
    let pts = MajoringPointSet::load(&points, CoverMode::Grid).unwrap();
    verified.verification = Some(verify_samples(&verified.net, &pts));
    model_save(&verified, dir.path().join("ok.json")).unwrap();

    let o = cli(dir.path(), &["predict", "--model", "raw.json", "--x", "0.5"]);
    assert!(!o.status.success());
    assert!(text(&o).contains("refusing"));
    let o = cli(dir.path(), &["predict", "--model", "raw.json", "--x", "0.5", "--unverified"]);
    assert!(o.status.success(), "{}", text(&o));

    let o = cli(dir.path(), &["predict", "--model", "ok.json", "--x", "0.5", "--x", "1"]);
    assert!(o.status.success(), "{}", text(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().count(), 2);
    assert!(out.contains("\"y\":3.0"));

    let o = cli(dir.path(), &["predict", "--model", "ok.json", "--x", "-0.5"]);
    assert!(!o.status.success());
    assert!(text(&o).contains("outside"));
    let o = cli(dir.path(), &["predict", "--model", "ok.json", "--x", "-0.5", "--extrapolate"]);
    assert!(o.status.success());
    assert!(text(&o).contains("warning"));

    let o = cli(dir.path(), &["predict", "--model", "ok.json", "--x", "0.5,0.5"]);
    assert!(!o.status.success());
}

#[test]
fn train_eval_and_run() {
    let dir = tempfile::tempdir().unwrap();
    cli(dir.path(), &["cover", "--function", "f1", "--eps", "0.5", "--out", "c.json"]);
    cli(dir.path(), &["points", "--cover", "c.json", "--function", "f1", "--out", "p.csv"]);
    let o = cli(
        dir.path(),
        &[
            "train", "--points", "p.csv", "--function", "f1", "--epochs", "1000", "--beta", "0.1", "--alpha-plus", "1",
            "--alpha-minus", "100", "--p", "2", "--width", "64", "--depth", "4", "--theta", "1", "--seed", "0", "--out",
            "m.json",
        ],
    );
    let code = o.status.code();
    assert!(code == Some(0) || code == Some(2), "{}", text(&o));
    let saved = model_load(dir.path().join("m.json")).unwrap();
    assert_eq!(saved.is_certified(), code == Some(0));

    let o = cli(dir.path(), &["eval", "--model", "m.json", "--function", "f1", "--points", "p.csv", "--n-test", "5000", "--out", "e.csv"]);
    assert!(o.status.success(), "{}", text(&o));
    let csv = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert!(csv.starts_with("method,m,n_test"));

    std::fs::write(
        dir.path().join("spec.json"),
        r#"{"name":"s","function":"f1","methods":[{"label":"g","mode":"grid","eps":0.5,"train":false}],"n_test":1000}"#,
    )
    .unwrap();
    for out in ["r1", "r2"] {
        let o = cli(dir.path(), &["run", "--spec", "spec.json", "--out", out]);
        assert!(o.status.success(), "{}", text(&o));
    }
    let a = std::fs::read(dir.path().join("r1/metrics.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("r2/metrics.csv")).unwrap());

    std::fs::write(dir.path().join("empty.json"), r#"{"name":"e","function":"f1"}"#).unwrap();
    let o = cli(dir.path(), &["run", "--spec", "empty.json"]);
    assert!(!o.status.success());
    assert!(text(&o).contains("spec"));
}
