//! Train a monotone network on Majoring Points of f1, verify it, save it
//! with its certificate, and check it on fresh test points.
//!
//! `cargo run --release --example certify -- --full` uses the 200-point grid
//! and the default training configuration.

use majoring::cover::{build_grid_cover, majoring_points_from_cover_fn};
use majoring::eval::{net_predictor, op_metric, rmse, TestSet};
use majoring::network::{model_load, model_save, train_until_verified, SavedModel, TrainConfig};
use majoring::oracle::Synthetic;

pub struct Summary {
    pub points: usize,
    pub attempts: usize,
    pub verified: bool,
    pub op_percent: f64,
    pub rmse: f64,
}

pub fn run_example_with(full: bool) -> majoring::Result<Summary> {
    let oracle = Synthetic::F1.oracle();
    let (eps, cfg) = if full {
        (0.1, TrainConfig::default())
    } else {
        (0.5, TrainConfig { epochs: 1000, batch_size: 16, ..TrainConfig::default() })
    };
    let cover = build_grid_cover(oracle.domain(), eps)?;
    let pts = majoring_points_from_cover_fn(&cover, &oracle)?;
    let outcome = train_until_verified(&pts, &cfg).map_err(|e| majoring::Error::InvalidModel(e.to_string()))?;
    println!(
        "{} Majoring Points, verified after {} attempt(s), min margin {:.4}",
        pts.len(),
        outcome.report.history.len(),
        outcome.report.min_margin
    );

    let dir = std::env::temp_dir().join(format!("majoring-certify-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.json");
    let saved = SavedModel::monotone(outcome.net, Some(oracle.domain().clone()), Some(outcome.report));
    model_save(&saved, &path)?;
    let loaded = model_load(&path)?;
    std::fs::remove_dir_all(&dir)?;

    let test = TestSet::uniform(&oracle, 100_000, 1)?;
    let summary = Summary {
        points: pts.len(),
        attempts: loaded.verification.as_ref().map_or(0, |r| r.history.len()),
        verified: loaded.is_certified(),
        op_percent: op_metric(net_predictor(&loaded.net), &test),
        rmse: rmse(net_predictor(&loaded.net), &test),
    };
    println!(
        "certified: {}; over-estimates on {}% of 100000 test points; rmse {:.4}",
        summary.verified, summary.op_percent, summary.rmse
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
