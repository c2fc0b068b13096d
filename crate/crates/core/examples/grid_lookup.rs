//! Grid cover of f1 and its piecewise-constant over-estimate f_C.

use majoring::cover::{build_grid_cover, majoring_points_from_cover_fn};
use majoring::eval::{op_metric, rmse, TestSet};
use majoring::majorant::LookupSurrogate;
use majoring::oracle::Synthetic;

pub struct Summary {
    pub cells: usize,
    pub rmse: f64,
    pub op_percent: f64,
    pub floats: usize,
}

pub fn run_example() -> majoring::Result<Summary> {
    let oracle = Synthetic::F1.oracle();
    let mut cover = build_grid_cover(oracle.domain(), 0.1)?;
    cover.annotate_fn(&oracle)?;
    let pts = majoring_points_from_cover_fn(&cover, &oracle)?;
    let f_c = LookupSurrogate::from_cover(&cover)?;

    let first = &pts.points()[0];
    println!("{} cells; first Majoring Point a={:?} b={:.5}", cover.len(), first.a.as_slice(), first.b);

    let test = TestSet::uniform(&oracle, 100_000, 0)?;
    let predict = |x: &[f64]| f_c.eval(x).expect("test points lie in the domain");
    let summary = Summary {
        cells: cover.len(),
        rmse: rmse(predict, &test),
        op_percent: op_metric(predict, &test),
        floats: f_c.memory_footprint(),
    };
    println!(
        "f_C: rmse {:.4}, over-estimates on {}% of test points, stores {} floats",
        summary.rmse, summary.op_percent, summary.floats
    );
    Ok(summary)
}

#[allow(dead_code)]
fn main() -> majoring::Result<()> {
    run_example().map(|_| ())
}
