//! Six-dimensional pipeline on a synthetic monotone function, with the
//! storage comparison between the network and the point table.
//!
//! `--full` uses the 0.25 grid (4096 points) instead of the 0.5 grid.

use majoring::cover::{build_grid_cover, majoring_points_from_cover_fn};
use majoring::eval::{monotonicity_probe, net_predictor, op_metric, TestSet};
use majoring::majorant::lookup_memory_footprint;
use majoring::network::{reference_float_count, train_until_verified, TrainConfig};
use majoring::oracle::Synthetic;

pub struct Summary {
    pub points: usize,
    pub violations: usize,
    pub op_percent: f64,
    pub probe_violations: usize,
    pub model_floats: usize,
    pub table_floats: usize,
}

pub fn run_example_with(full: bool) -> majoring::Result<Summary> {
    let oracle = Synthetic::Mono6.oracle();
    let eps = if full { 0.25 } else { 0.5 };
    let cover = build_grid_cover(oracle.domain(), eps)?;
    let pts = majoring_points_from_cover_fn(&cover, &oracle)?;
    let cfg = TrainConfig {
        epochs: if full { 200 } else { 1000 },
        batch_size: if full { 64 } else { 16 },
        ..TrainConfig::default()
    };
    let outcome = train_until_verified(&pts, &cfg).map_err(|e| majoring::Error::InvalidModel(e.to_string()))?;
    let test = TestSet::uniform(&oracle, 20_000, 2)?;
    let summary = Summary {
        points: pts.len(),
        violations: outcome.report.violations,
        op_percent: op_metric(net_predictor(&outcome.net), &test),
        probe_violations: monotonicity_probe(net_predictor(&outcome.net), oracle.domain(), 10_000, 3)?,
        model_floats: outcome.net.param_count(),
        table_floats: lookup_memory_footprint(pts.len(), 6),
    };
    println!(
        "{} points, {} violations, OP {}%, {} monotonicity violations",
        summary.points, summary.violations, summary.op_percent, summary.probe_violations
    );
    println!(
        "storage: network {} floats (reference architecture {}), point table {} floats",
        summary.model_floats,
        reference_float_count(6),
        summary.table_floats
    );
    Ok(summary)
}

pub fn run_example() -> majoring::Result<Summary> {
    run_example_with(false)
}

#[allow(dead_code)]
fn main() -> majoring::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    run_example_with(full).map(|_| ())
}
