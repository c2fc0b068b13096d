//! Accuracy and over-estimation metrics, the shifted-target baseline, and
//! the experiment driver.

mod experiment;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cover::{CoverMode, MajoringPoint, MajoringPointSet};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::network::{fit, InputMap, Mlp, Objective, OutputMap, Scratch, TrainConfig};
use crate::oracle::{sample_uniform, Dataset, FunctionOracle};

pub use experiment::{run_experiment, run_experiment_file, ExperimentResult, ExperimentSpec, MethodSpec};

/// Number of test points used for the synthetic experiments.
pub const DEFAULT_TEST_POINTS: usize = 100_000;

/// Test inputs with their exact reference values.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    dim: usize,
    xs: Vec<Point>,
    ys: Vec<f64>,
    seed: u64,
}

impl TestSet {
    /// `n` uniform points of the oracle's domain.
    pub fn uniform(oracle: &FunctionOracle, n: usize, seed: u64) -> Result<Self> {
        let xs = sample_uniform(oracle.domain(), n, seed)?;
        let ys = xs.iter().map(|x| oracle.eval(x)).collect();
        Ok(TestSet {
            dim: oracle.dim(),
            xs,
            ys,
            seed,
        })
    }

    /// Uses the dataset's own records as the test set.
    pub fn from_dataset(data: &Dataset) -> Self {
        TestSet {
            dim: data.dim(),
            xs: data.points().to_vec(),
            ys: data.values().to_vec(),
            seed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.xs.iter().map(|p| p.as_slice()).zip(self.ys.iter().copied())
    }
}

/// `(1/m) sum_i (b_i - f(a_i))`. NaN for an empty set.
pub fn mae(pts: &MajoringPointSet, oracle: &FunctionOracle) -> f64 {
    let sum: f64 = pts.iter().map(|p| p.b - oracle.eval(&p.a)).sum();
    sum / pts.len() as f64
}

/// Root mean square of `predict(x) - f(x)` over the test set.
pub fn rmse(mut predict: impl FnMut(&[f64]) -> f64, test: &TestSet) -> f64 {
    let sum: f64 = test.iter().map(|(x, y)| (predict(x) - y).powi(2)).sum();
    (sum / test.len() as f64).sqrt()
}

/// Mean of `predict(x) - f(x)`.
pub fn mean_signed_error(mut predict: impl FnMut(&[f64]) -> f64, test: &TestSet) -> f64 {
    let sum: f64 = test.iter().map(|(x, y)| predict(x) - y).sum();
    sum / test.len() as f64
}

/// Percentage of test points with `predict(x) >= f(x)`.
pub fn op_metric(mut predict: impl FnMut(&[f64]) -> f64, test: &TestSet) -> f64 {
    let hits = test.iter().filter(|(x, y)| predict(x) >= *y).count();
    100.0 * hits as f64 / test.len() as f64
}

/// Counts ordered pairs `x <= x'` with `predict(x) > predict(x')`. The
/// second point is the first plus a non-negative offset, clipped to the box.
pub fn monotonicity_probe(
    mut predict: impl FnMut(&[f64]) -> f64,
    domain: &Domain,
    n_pairs: usize,
    seed: u64,
) -> Result<usize> {
    if n_pairs == 0 {
        return Err(Error::InvalidParameter("monotonicity probe needs at least one pair".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (domain.y_min(), domain.y_max());
    let d = domain.dim();
    let mut x = vec![0.0; d];
    let mut x2 = vec![0.0; d];
    let mut violations = 0;
    for _ in 0..n_pairs {
        // cubing favours short offsets, where a violation is easier to miss
        let reach = rng.gen_range(0.0f64..1.0).powi(3);
        for k in 0..d {
            x[k] = rng.gen_range(lo[k]..=hi[k]);
            let step = rng.gen_range(0.0..=1.0) * reach * (hi[k] - lo[k]);
            x2[k] = (x[k] + step).min(hi[k]);
        }
        if predict(&x) > predict(&x2) {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Wraps a network into a reusable predictor closure.
pub fn net_predictor(net: &Mlp) -> impl FnMut(&[f64]) -> f64 + '_ {
    let mut scratch = Scratch::default();
    move |x| net.forward_with(x, &mut scratch)
}

/// The points `(a_i, f(a_i) + delta)`.
pub fn baseline_points(pts: &MajoringPointSet, oracle: &FunctionOracle, delta: f64) -> Result<MajoringPointSet> {
    check_delta(delta)?;
    let shifted = pts
        .iter()
        .map(|p| MajoringPoint {
            a: p.a.clone(),
            b: oracle.eval(&p.a) + delta,
        })
        .collect();
    MajoringPointSet::new(pts.dim(), shifted, pts.source())
}

/// Dataset records shifted by `delta`, as Majoring-Point-shaped pairs.
pub fn baseline_points_from_data(data: &Dataset, delta: f64) -> Result<MajoringPointSet> {
    check_delta(delta)?;
    let shifted = data
        .iter()
        .map(|(x, y)| MajoringPoint {
            a: x.clone(),
            b: y + delta,
        })
        .collect();
    MajoringPointSet::new(data.dim(), shifted, CoverMode::DataAdapted)
}

/// The delta-baseline: an unconstrained network of the configured
/// architecture fitted with the squared loss to targets that already
/// include the shift (see [`baseline_points`]). No projection, no
/// verification.
pub fn delta_baseline_train(targets: &MajoringPointSet, cfg: &TrainConfig) -> Result<Mlp> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no baseline targets".into()));
    }
    let xs: Vec<&[f64]> = targets.iter().map(|p| p.a.as_slice()).collect();
    let ys: Vec<f64> = targets.iter().map(|p| p.b).collect();
    let mut net = Mlp::init(targets.dim(), cfg.arch.depth, cfg.arch.width, cfg.arch.theta, cfg.seed)?;
    net.set_maps(InputMap::fit(targets.dim(), xs.iter().copied()), OutputMap::fit(&ys))?;
    fit(&mut net, &xs, &ys, &Objective::Squared, cfg, false)?;
    Ok(net)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("baseline shift must be finite and >= 0, got {delta}")));
    }
    Ok(())
}

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    /// Number of Majoring Points (or training targets).
    pub m: usize,
    pub n_test: usize,
    pub seed: u64,
    pub mae: Option<f64>,
    pub rmse: f64,
    pub mean_signed_error: f64,
    pub op_percent: f64,
    /// Formal guarantee: a monotone model that passed verification, or the
    /// lookup surrogate itself.
    pub fg: bool,
    pub monotonicity_violations: Option<usize>,
    /// Floats needed to store the surrogate.
    pub stored_floats: usize,
    /// Volume share of the domain left without a Majoring Point.
    pub uncovered_fraction: f64,
}

pub fn write_metrics_csv<W: std::io::Write>(rows: &[MetricsReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: std::io::Read>(reader: R) -> Result<Vec<MetricsReport>> {
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsReport>, _>>()?;
    Ok(rows)
}
