//! End-to-end experiment driver: data, cover, points, training,
//! verification, metrics and plot data, all driven by one JSON spec.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    baseline_points, baseline_points_from_data, delta_baseline_train, mae, mean_signed_error, monotonicity_probe,
    net_predictor, op_metric, rmse, write_metrics_csv, MetricsReport, TestSet, DEFAULT_TEST_POINTS,
};
use crate::cover::{
    build_adaptive_cover_data, build_adaptive_cover_fn, build_grid_cover, majoring_points_from_cover_data,
    majoring_points_from_cover_fn, AdaptiveParams, Cover, CoverMode, MajoringPointSet,
};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::majorant::{lookup_memory_footprint, LookupSurrogate};
use crate::network::{model_save, train_until_verified, Mlp, SavedModel, TrainConfig, TrainError};
use crate::oracle::{dataset_load, Dataset, FunctionOracle, Synthetic};

/// One cover-and-train pipeline of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub label: String,
    pub mode: CoverMode,
    pub eps: f64,
    #[serde(default)]
    pub eps_f: Option<f64>,
    #[serde(default)]
    pub n_p: Option<usize>,
    /// Set to false to only build the cover (point-count comparisons).
    #[serde(default = "yes")]
    pub train: bool,
}

fn yes() -> bool {
    true
}

fn default_n_test() -> usize {
    DEFAULT_TEST_POINTS
}

fn default_curve_points() -> usize {
    2001
}

fn default_probe_pairs() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Built-in reference function; enables the oracle-mode metrics.
    #[serde(default)]
    pub function: Option<Synthetic>,
    /// CSV dataset, used by the data-adapted mode.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Defaults to the function's domain.
    #[serde(default)]
    pub domain: Option<Domain>,
    /// Samples drawn from `function` when the data-adapted mode runs
    /// without a dataset file.
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    /// Shifts of the baseline networks, trained on the first method's points.
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Seed of the test set, the sampled dataset and the probes.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
    #[serde(default = "default_probe_pairs")]
    pub probe_pairs: usize,
}

impl ExperimentSpec {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec: ExperimentSpec = serde_json::from_reader(File::open(path)?)?;
        // relative dataset paths are relative to the spec file
        if let (Some(ds), Some(dir)) = (&spec.dataset, path.parent()) {
            if ds.is_relative() {
                spec.dataset = Some(dir.join(ds));
            }
        }
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() && self.deltas.is_empty() {
            return Err(Error::InvalidParameter("experiment spec lists no methods and no baselines".into()));
        }
        if self.function.is_none() && self.dataset.is_none() {
            return Err(Error::InvalidParameter("experiment spec needs a function or a dataset".into()));
        }
        if self.n_test == 0 {
            return Err(Error::InvalidParameter("n_test must be at least 1".into()));
        }
        let mut labels: Vec<&str> = self.methods.iter().map(|m| m.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("method labels must be unique".into()));
        }
        if let Some(bad) = self.methods.iter().find(|m| !is_file_safe(&m.label)) {
            return Err(Error::InvalidParameter(format!("label `{}` must be [A-Za-z0-9_.-]+", bad.label)));
        }
        self.train.validate()
    }
}

fn is_file_safe(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c))
}

/// Outcome of [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<MetricsReport>,
    /// Cell count of every method's cover, in spec order.
    pub cell_counts: Vec<(String, usize)>,
    pub out_dir: PathBuf,
}

impl ExperimentResult {
    pub fn row(&self, method: &str) -> Option<&MetricsReport> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn cell_count(&self, label: &str) -> Option<usize> {
        self.cell_counts.iter().find(|(l, _)| l == label).map(|(_, n)| *n)
    }
}

/// Reads a spec file and runs it; `out_dir` overrides the spec's directory.
pub fn run_experiment_file(path: impl AsRef<Path>, out_dir: Option<&Path>) -> Result<ExperimentResult> {
    let spec = ExperimentSpec::from_file(path).map_err(|e| e.at_stage("spec"))?;
    run_experiment(&spec, out_dir)
}

/// Runs every method of the spec and writes `metrics.csv`, `curve_*.csv`
/// (1D only), `cells_*.json` and `model_*.json` to the output directory.
/// The outputs are a deterministic function of the spec.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<ExperimentResult> {
    spec.validate().map_err(|e| e.at_stage("spec"))?;
    let out = out_dir
        .map(Path::to_path_buf)
        .or_else(|| spec.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(&spec.name));
    std::fs::create_dir_all(&out).map_err(|e| Error::from(e).at_stage("output"))?;

    let oracle = spec.function.map(Synthetic::oracle);
    let domain = match (&spec.domain, &oracle) {
        (Some(d), _) => d.clone(),
        (None, Some(o)) => o.domain().clone(),
        (None, None) => return Err(Error::InvalidParameter("a dataset needs an explicit domain".into()).at_stage("spec")),
    };
    if let Some(o) = &oracle {
        if o.domain() != &domain {
            return Err(Error::InvalidParameter("domain differs from the function's domain".into()).at_stage("spec"));
        }
    }
    let data = load_data(spec, &domain, oracle.as_ref()).map_err(|e| e.at_stage("data"))?;
    let test = match (&oracle, &data) {
        (Some(o), _) => TestSet::uniform(o, spec.n_test, spec.seed),
        (None, Some(d)) => Ok(TestSet::from_dataset(d)),
        (None, None) => unreachable!("validated: function or dataset"),
    }
    .map_err(|e| e.at_stage("test set"))?;

    let mut rows = Vec::new();
    let mut cell_counts = Vec::new();
    let mut curves: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    let mut first_points: Option<MajoringPointSet> = None;

    for method in &spec.methods {
        let mut cover = build_cover(method, &domain, oracle.as_ref(), data.as_ref()).map_err(|e| e.at_stage("cover"))?;
        cell_counts.push((method.label.clone(), cover.len()));
        let pts = (|| match (method.mode, &oracle, &data) {
            (CoverMode::DataAdapted, _, Some(d)) => {
                cover.annotate_data(d)?;
                majoring_points_from_cover_data(&cover, d)
            }
            (_, Some(o), _) => {
                cover.annotate_fn(o)?;
                majoring_points_from_cover_fn(&cover, o)
            }
            _ => Err(Error::InvalidParameter("mode needs a function".into())),
        })()
        .map_err(|e| e.at_stage("points"))?;
        cover
            .save(out.join(format!("cells_{}.json", method.label)))
            .map_err(|e| e.at_stage("output"))?;

        let lookup = lookup_for(&cover).map_err(|e| e.at_stage("points"))?;
        if pts.dropped() == 0 {
            let mut f_c = |x: &[f64]| lookup.eval(x).unwrap_or(f64::INFINITY);
            rows.push(MetricsReport {
                method: format!("fc-{}", method.label),
                m: pts.len(),
                n_test: test.len(),
                seed: spec.seed,
                mae: oracle.as_ref().map(|o| mae(&pts, o)),
                rmse: rmse(&mut f_c, &test),
                mean_signed_error: mean_signed_error(&mut f_c, &test),
                op_percent: op_metric(&mut f_c, &test),
                fg: oracle.is_some() || method.mode == CoverMode::DataAdapted,
                monotonicity_violations: None,
                stored_floats: lookup_memory_footprint(pts.len(), domain.dim()),
                uncovered_fraction: 0.0,
            });
        }
        if domain.dim() == 1 {
            curves.push((format!("fc_{}", method.label), sweep(&domain, spec.curve_points, |x| lookup.eval(x).ok())));
        }
        if first_points.is_none() {
            first_points = Some(pts.clone());
        }
        if !method.train {
            continue;
        }

        let (net, report) = match train_until_verified(&pts, &spec.train) {
            Ok(outcome) => (outcome.net, outcome.report),
            Err(TrainError::Exhausted { best, .. }) => (best.net, best.report),
            Err(TrainError::Failed(e)) => return Err(e.at_stage("train")),
        };
        let fg = report.pass;
        let saved = SavedModel::monotone(net, Some(domain.clone()), Some(report));
        model_save(&saved, out.join(format!("model_{}.json", method.label))).map_err(|e| e.at_stage("output"))?;
        rows.push(net_row(
            format!("onn-{}", method.label),
            &saved.net,
            &pts,
            oracle.as_ref(),
            &test,
            spec,
            &domain,
            fg,
        )?);
        if domain.dim() == 1 {
            curves.push((format!("onn_{}", method.label), sweep(&domain, spec.curve_points, |x| Some(net_predictor(&saved.net)(x)))));
        }
    }

    for &delta in &spec.deltas {
        let targets = match (&oracle, &first_points, &data) {
            (Some(o), Some(p), _) => baseline_points(p, o, delta),
            (_, _, Some(d)) => baseline_points_from_data(d, delta),
            _ => Err(Error::InvalidParameter("baselines need Majoring Points or a dataset".into())),
        }
        .map_err(|e| e.at_stage("baseline"))?;
        let net = delta_baseline_train(&targets, &spec.train).map_err(|e| e.at_stage("baseline"))?;
        let label = format!("baseline-{delta}");
        let mut row = net_row(label.clone(), &net, &targets, oracle.as_ref(), &test, spec, &domain, false)?;
        // the mean shift of the targets, not a Majoring margin
        row.mae = oracle.as_ref().map(|o| mae(&targets, o));
        rows.push(row);
        if domain.dim() == 1 {
            curves.push((format!("baseline_{delta}"), sweep(&domain, spec.curve_points, |x| Some(net_predictor(&net)(x)))));
        }
    }

    let write = || -> Result<()> {
        write_metrics_csv(&rows, BufWriter::new(File::create(out.join("metrics.csv"))?))?;
        if domain.dim() == 1 {
            write_curve(&out.join("curve_1d.csv"), &domain, spec.curve_points, oracle.as_ref(), &curves)?;
        }
        Ok(())
    };
    write().map_err(|e| e.at_stage("output"))?;
    Ok(ExperimentResult {
        rows,
        cell_counts,
        out_dir: out,
    })
}

fn load_data(spec: &ExperimentSpec, domain: &Domain, oracle: Option<&FunctionOracle>) -> Result<Option<Dataset>> {
    if let Some(path) = &spec.dataset {
        return dataset_load(path, domain).map(Some);
    }
    let needs_data = spec.methods.iter().any(|m| m.mode == CoverMode::DataAdapted);
    match (needs_data, oracle, spec.n_samples) {
        (false, _, _) => Ok(None),
        (true, Some(o), Some(n)) => Dataset::sample(o, n, spec.seed).map(Some),
        (true, _, _) => Err(Error::InvalidParameter(
            "the data-adapted mode needs a dataset file or a function with n_samples".into(),
        )),
    }
}

fn build_cover(
    method: &MethodSpec,
    domain: &Domain,
    oracle: Option<&FunctionOracle>,
    data: Option<&Dataset>,
) -> Result<Cover> {
    match method.mode {
        CoverMode::Grid => build_grid_cover(domain, method.eps),
        CoverMode::FunctionAdapted => {
            let o = oracle.ok_or_else(|| Error::InvalidParameter("function-adapted mode needs a function".into()))?;
            let eps_f = method
                .eps_f
                .ok_or_else(|| Error::InvalidParameter("function-adapted mode needs eps_f".into()))?;
            build_adaptive_cover_fn(domain, o, AdaptiveParams::new(method.eps, eps_f, method.n_p.unwrap_or(0))?)
        }
        CoverMode::DataAdapted => {
            let d = data.ok_or_else(|| Error::InvalidParameter("data-adapted mode needs a dataset".into()))?;
            let eps_f = method
                .eps_f
                .ok_or_else(|| Error::InvalidParameter("data-adapted mode needs eps_f".into()))?;
            let n_p = method
                .n_p
                .ok_or_else(|| Error::InvalidParameter("data-adapted mode needs n_p".into()))?;
            build_adaptive_cover_data(domain, d, AdaptiveParams::new(method.eps, eps_f, n_p)?)
        }
    }
}

/// f_C over the cells with a finite upper value.
fn lookup_for(cover: &Cover) -> Result<LookupSurrogate> {
    let vals = cover.upper_values().unwrap_or_default();
    if vals.iter().all(|v| v.is_some_and(f64::is_finite)) {
        return LookupSurrogate::from_cover(cover);
    }
    let (cells, values): (Vec<_>, Vec<_>) = cover
        .cells()
        .iter()
        .zip(vals)
        .filter_map(|(c, v)| v.filter(|b| b.is_finite()).map(|b| (c.clone(), b)))
        .unzip();
    if cells.is_empty() {
        return Err(Error::NoFiniteCells);
    }
    LookupSurrogate::from_cells(cover.domain().clone(), cells, values)
}

#[allow(clippy::too_many_arguments)]
fn net_row(
    method: String,
    net: &Mlp,
    pts: &MajoringPointSet,
    oracle: Option<&FunctionOracle>,
    test: &TestSet,
    spec: &ExperimentSpec,
    domain: &Domain,
    fg: bool,
) -> Result<MetricsReport> {
    let probe = monotonicity_probe(net_predictor(net), domain, spec.probe_pairs, spec.seed ^ 0x9e37_79b9)
        .map_err(|e| e.at_stage("metrics"))?;
    Ok(MetricsReport {
        method,
        m: pts.len(),
        n_test: test.len(),
        seed: spec.seed,
        mae: oracle.map(|o| mae(pts, o)),
        rmse: rmse(net_predictor(net), test),
        mean_signed_error: mean_signed_error(net_predictor(net), test),
        op_percent: op_metric(net_predictor(net), test),
        fg,
        monotonicity_violations: Some(probe),
        stored_floats: net.stored_float_count(),
        uncovered_fraction: pts.uncovered_fraction(),
    })
}

fn sweep_x(domain: &Domain, n: usize, i: usize) -> f64 {
    let (lo, hi) = (domain.y_min()[0], domain.y_max()[0]);
    if i + 1 == n {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64
    }
}

fn sweep(domain: &Domain, n: usize, mut f: impl FnMut(&[f64]) -> Option<f64>) -> Vec<Option<f64>> {
    (0..n).map(|i| f(&[sweep_x(domain, n, i)])).collect()
}

fn write_curve(
    path: &Path,
    domain: &Domain,
    n: usize,
    oracle: Option<&FunctionOracle>,
    columns: &[(String, Vec<Option<f64>>)],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = vec!["x".to_string()];
    if oracle.is_some() {
        header.push("f".into());
    }
    header.extend(columns.iter().map(|(name, _)| name.clone()));
    writeln!(w, "{}", header.join(","))?;
    let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for i in 0..n {
        let x = sweep_x(domain, n, i);
        let mut line = vec![x.to_string()];
        if let Some(o) = oracle {
            line.push(o.eval(&[x]).to_string());
        }
        line.extend(columns.iter().map(|(_, col)| cell(col[i])));
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Architecture, GrowPolicy};

    fn quick_spec(dir: &Path) -> ExperimentSpec {
        ExperimentSpec {
            name: "quick".into(),
            function: Some(Synthetic::F1),
            dataset: None,
            domain: None,
            n_samples: Some(300),
            methods: vec![
                MethodSpec {
                    label: "grid".into(),
                    mode: CoverMode::Grid,
                    eps: 0.5,
                    eps_f: None,
                    n_p: None,
                    train: true,
                },
                MethodSpec {
                    label: "data".into(),
                    mode: CoverMode::DataAdapted,
                    eps: 0.5,
                    eps_f: Some(1.0),
                    n_p: Some(2),
                    train: false,
                },
            ],
            deltas: vec![0.0, 0.5],
            train: TrainConfig {
                arch: Architecture {
                    depth: 2,
                    width: 16,
                    theta: 1.0,
                },
                epochs: 300,
                grow: GrowPolicy {
                    max_attempts: 1,
                    ..GrowPolicy::default()
                },
                ..TrainConfig::default()
            },
            n_test: 2000,
            seed: 4,
            out_dir: Some(dir.to_path_buf()),
            curve_points: 101,
            probe_pairs: 500,
        }
    }

    #[test]
    fn end_to_end_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run_experiment(&quick_spec(a.path()), None).unwrap();
        let rb = run_experiment(&quick_spec(a.path()), Some(b.path())).unwrap();
        assert_eq!(ra.rows, rb.rows);
        let bytes = |d: &Path| std::fs::read(d.join("metrics.csv")).unwrap();
        assert_eq!(bytes(a.path()), bytes(b.path()));
        for f in ["curve_1d.csv", "cells_grid.json", "cells_data.json", "model_grid.json"] {
            assert!(a.path().join(f).exists(), "{f}");
        }
        let methods: Vec<&str> = ra.rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(methods, ["fc-grid", "onn-grid", "baseline-0", "baseline-0.5"]);
        assert_eq!(ra.cell_count("grid"), Some(40));
        let fc = ra.row("fc-grid").unwrap();
        assert_eq!(fc.op_percent, 100.0);
        assert!(fc.fg);
        let onn = ra.row("onn-grid").unwrap();
        assert_eq!(onn.monotonicity_violations, Some(0));
        if onn.fg {
            assert_eq!(onn.op_percent, 100.0);
        }
        assert!(!ra.row("baseline-0").unwrap().fg);
    }

    #[test]
    fn empty_spec_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = quick_spec(dir.path());
        spec.methods.clear();
        spec.deltas.clear();
        match run_experiment(&spec, None) {
            Err(Error::Stage { stage: "spec", .. }) => {}
            other => panic!("{other:?}"),
        }
        let parsed: std::result::Result<ExperimentSpec, _> = serde_json::from_str("{}");
        assert!(parsed.is_err());
    }

    #[test]
    fn stage_label_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = quick_spec(dir.path());
        spec.methods[0].mode = CoverMode::FunctionAdapted;
        match run_experiment(&spec, None) {
            Err(e @ Error::Stage { stage: "cover", .. }) => assert!(e.to_string().contains("cover")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spec_json_defaults() {
        let spec: ExperimentSpec = serde_json::from_str(
            r#"{"name":"x","function":"f1","methods":[{"label":"g","mode":"grid","eps":0.1}]}"#,
        )
        .unwrap();
        assert_eq!(spec.n_test, 100_000);
        assert!(spec.methods[0].train);
        assert_eq!(spec.train, TrainConfig::default());
    }
}
