//! Data-adapted Majoring Points from a sample of f1 alone.

use majoring::cover::{build_adaptive_cover_data, majoring_points_from_cover_data, AdaptiveParams};
use majoring::oracle::{Dataset, Synthetic};

pub struct Summary {
    pub samples: usize,
    pub cells: usize,
    pub points: usize,
    pub dropped: usize,
    pub uncovered_fraction: f64,
    pub unsound: usize,
}

pub fn run_example() -> majoring::Result<Summary> {
    let oracle = Synthetic::F1.oracle();
    let data = Dataset::sample(&oracle, 500, 0)?;
    let cover = build_adaptive_cover_data(oracle.domain(), &data, AdaptiveParams::new(0.1, 1.0, 2)?)?;
    let pts = majoring_points_from_cover_data(&cover, &data)?;

    // the oracle is only used here, to check the points against the truth
    let unsound = pts.iter().filter(|p| p.b < oracle.eval(&p.a)).count();
    let summary = Summary {
        samples: data.len(),
        cells: cover.len(),
        points: pts.len(),
        dropped: pts.dropped(),
        uncovered_fraction: pts.uncovered_fraction(),
        unsound,
    };
    println!(
        "{} samples -> {} cells, {} Majoring Points ({} cells with no dominating sample, {:.2e} of the volume)",
        summary.samples, summary.cells, summary.points, summary.dropped, summary.uncovered_fraction
    );
    Ok(summary)
}

#[allow(dead_code)]
fn main() -> majoring::Result<()> {
    run_example().map(|_| ())
}
