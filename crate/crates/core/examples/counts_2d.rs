//! Point economy in 2D: a 0.1 grid on [0,15]^2 against function-adapted
//! covers with the same diameter floor.

use majoring::cover::{build_adaptive_cover_fn, build_grid_cover, AdaptiveParams};
use majoring::oracle::Synthetic;

pub struct Summary {
    pub grid: usize,
    /// `(eps_f, cells)`
    pub adaptive: Vec<(f64, usize)>,
}

pub fn run_example() -> majoring::Result<Summary> {
    let oracle = Synthetic::G2d.oracle();
    let grid = build_grid_cover(oracle.domain(), 0.1)?.len();
    println!("grid eps=0.1: {grid} cells");
    let mut adaptive = Vec::new();
    for eps_f in [0.5, 2.0] {
        let cover = build_adaptive_cover_fn(oracle.domain(), &oracle, AdaptiveParams::new(0.1, eps_f, 0)?)?;
        println!("adaptive eps=0.1 eps_f={eps_f}: {} cells, {} rounds", cover.len(), cover.rounds());
        adaptive.push((eps_f, cover.len()));
    }
    Ok(Summary { grid, adaptive })
}

#[allow(dead_code)]
fn main() -> majoring::Result<()> {
    run_example().map(|_| ())
}
