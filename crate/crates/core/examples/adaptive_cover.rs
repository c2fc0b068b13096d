//! Function-adapted cover: Algorithm-1 dichotomy on the 2D function g2d.

use majoring::cover::{build_adaptive_cover_fn, max_rounds, AdaptiveParams};
use majoring::oracle::{sample_uniform, Synthetic};

pub struct Summary {
    pub cells: usize,
    pub rounds: usize,
    pub round_bound: usize,
    pub uncovered_samples: usize,
}

pub fn run_example() -> majoring::Result<Summary> {
    let oracle = Synthetic::G2d.oracle();
    let domain = oracle.domain().clone();
    let params = AdaptiveParams::new(0.1, 2.0, 0)?;
    let cover = build_adaptive_cover_fn(&domain, &oracle, params)?;

    // every point of the domain must fall in some cell
    let uncovered_samples = sample_uniform(&domain, 10_000, 1)?
        .iter()
        .filter(|x| cover.cells_containing(x).next().is_none())
        .count();
    let summary = Summary {
        cells: cover.len(),
        rounds: cover.rounds(),
        round_bound: max_rounds(&domain, params.eps),
        uncovered_samples,
    };
    println!(
        "g2d, eps={} eps_f={}: {} cells after {} rounds (bound {}), {} of 10000 samples uncovered",
        params.eps, params.eps_f, summary.cells, summary.rounds, summary.round_bound, summary.uncovered_samples
    );
    Ok(summary)
}

#[allow(dead_code)]
fn main() -> majoring::Result<()> {
    run_example().map(|_| ())
}
