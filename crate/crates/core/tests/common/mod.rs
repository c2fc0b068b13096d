//! Checks shared by the property tests and the acceptance run. Each returns
//! a one-line description on success and an explanation on failure.
#![allow(dead_code)]

use majoring::cover::{
    build_adaptive_cover_fn, build_grid_cover, majoring_points_from_cover_fn, max_rounds, AdaptiveParams, Cover,
    CoverMode, MajoringPoint, MajoringPointSet,
};
use majoring::eval::{monotonicity_probe, net_predictor, TestSet};
use majoring::geometry::{Domain, HyperRectangle, Point};
use majoring::majorant::LookupSurrogate;
use majoring::network::{
    gradient, total_objective, verify_samples, InputMap, LossParams, Mlp, MonotoneMlp, Objective, OutputMap,
};
use majoring::oracle::{sample_uniform, FunctionOracle, Synthetic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

/// A monotone test function on any cube.
pub fn sum_oracle(d: usize) -> FunctionOracle {
    FunctionOracle::new("sum", Domain::cube(d, 0.0, 1.0).unwrap(), |x: &[f64]| {
        x.iter().enumerate().map(|(k, v)| (k + 1) as f64 * (v + 0.2 * (5.0 * v).sin())).sum()
    })
}

/// 10^4 ordered pairs on random non-negative-weight networks.
pub fn monotone_networks() -> Check {
    let mut total = 0;
    for (seed, d) in [(1u64, 1usize), (2, 2), (3, 6)] {
        let mut net = Mlp::init(d, 3, 16, 0.5, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat: Vec<f64> = (0..net.param_count()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        net.set_params_flat(&flat).unwrap();
        let net = MonotoneMlp::from_mlp_projected(net);
        let domain = Domain::cube(d, -5.0, 5.0).unwrap();
        let v = monotonicity_probe(net_predictor(&net), &domain, 10_000, seed).unwrap();
        if v != 0 {
            return Err(format!("{v} violations at d={d}"));
        }
        total += 10_000;
    }
    Ok(format!("0 violations over {total} ordered pairs"))
}

/// Backprop against central differences on 100 coordinates per p.
pub fn gradient_check() -> Check {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in 1..=3u32 {
        let mut net = Mlp::init(3, 3, 8, 1.0, p as u64).unwrap();
        let flat: Vec<f64> = (0..net.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        net.set_params_flat(&flat).unwrap();
        net.set_maps(
            InputMap {
                center: vec![0.5, 0.0, -1.0],
                half_width: vec![1.5, 2.0, 0.5],
            },
            OutputMap { mean: 0.2, scale: 1.3 },
        )
        .unwrap();
        let lp = LossParams {
            beta: 0.1,
            alpha_plus: 1.0,
            alpha_minus: 10.0,
            p,
        };
        let objective = Objective::Asymmetric(lp);
        let xs: Vec<Vec<f64>> = (0..8).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        // residuals well away from the knee, on both sides
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| net.forward(x).unwrap() + if i % 2 == 0 { 0.9 } else { -0.7 })
            .collect();
        let batch: Vec<(&[f64], f64)> = xs.iter().map(|x| x.as_slice()).zip(ys.iter().copied()).collect();
        let (_, grads) = gradient(&net, &batch, &objective);
        let analytic = grads.flat();
        let base = net.params_flat();
        let n = base.len();
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let h = 1e-6;
        for k in 0..100 {
            let i = (k * 7919) % n;
            let mut probe = net.clone();
            let mut q = base.clone();
            q[i] = base[i] + h;
            probe.set_params_flat(&q).unwrap();
            let up = total_objective(&probe, &refs, &ys, &objective);
            q[i] = base[i] - h;
            probe.set_params_flat(&q).unwrap();
            let down = total_objective(&probe, &refs, &ys, &objective);
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-6);
            if rel >= 1e-5 {
                return Err(format!("p={p} coord {i}: fd {fd} vs backprop {}", analytic[i]));
            }
            worst = worst.max(rel);
        }
    }
    Ok(format!("300 coordinates, worst relative error {worst:.2e}"))
}

fn uncovered(cover: &Cover, n: usize, seed: u64) -> usize {
    let pts = sample_uniform(cover.domain(), n, seed).unwrap();
    pts.iter().filter(|x| cover.cells_containing(x).next().is_none()).count()
}

/// 10^5 uniform points per cover, grid and adaptive, d = 1, 2, 3.
pub fn cover_completeness() -> Check {
    let mut checked = 0;
    for d in 1..=3 {
        let oracle = sum_oracle(d);
        let eps = [0.01, 0.05, 0.2][d - 1];
        let covers = [
            build_grid_cover(oracle.domain(), eps).unwrap(),
            build_adaptive_cover_fn(oracle.domain(), &oracle, AdaptiveParams::new(eps, 0.3, 0).unwrap()).unwrap(),
        ];
        for cover in &covers {
            // the corner y_max belongs to the closed top cell
            if cover.cells_containing(cover.domain().y_max()).next().is_none() {
                return Err(format!("d={d}: y_max uncovered"));
            }
            let missed = uncovered(cover, 100_000, d as u64);
            if missed != 0 {
                return Err(format!("d={d} {:?}: {missed} uncovered points", cover.mode()));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} covers, 10^5 points each, all covered"))
}

/// Each sampled point of a cell lies in exactly one of its children.
pub fn dyadic_decomposition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    for d in 1..=4 {
        for _ in 0..20 {
            let lo: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.01..3.0)).collect();
            let cell = HyperRectangle::from_bounds(lo.clone(), hi.clone()).unwrap();
            let children = cell.decompose().unwrap();
            if children.len() != 1 << d {
                return Err(format!("{} children at d={d}", children.len()));
            }
            for _ in 0..200 {
                let x: Vec<f64> = (0..d).map(|k| rng.gen_range(lo[k]..hi[k])).collect();
                let hits = children.iter().filter(|c| c.contains(&x).unwrap()).count();
                if hits != 1 {
                    return Err(format!("{x:?} lies in {hits} children"));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} points, each in exactly one child"))
}

/// Indexed lookup against the naive scan, bit for bit.
pub fn lookup_equivalence() -> Check {
    let g2d = Synthetic::G2d.oracle();
    let mut grid = build_grid_cover(g2d.domain(), 0.5).unwrap();
    grid.annotate_fn(&g2d).unwrap();
    let adaptive = build_adaptive_cover_fn(g2d.domain(), &g2d, AdaptiveParams::new(0.1, 2.0, 0).unwrap()).unwrap();
    let mut queries = 0;
    for cover in [&grid, &adaptive] {
        let f_c = LookupSurrogate::from_cover(cover).unwrap();
        let mut xs = sample_uniform(g2d.domain(), 9_990, 11).unwrap();
        // cell faces and the domain corners
        for v in [0.0, 0.5, 7.5, 14.5, 15.0] {
            xs.push(Point::new(vec![v, 15.0 - v]).unwrap());
            xs.push(Point::new(vec![v, v]).unwrap());
        }
        for x in &xs {
            let a = f_c.eval(x).map_err(|e| e.to_string())?;
            let b = f_c.eval_scan(x).map_err(|e| e.to_string())?;
            if a.to_bits() != b.to_bits() {
                return Err(format!("{:?}: index {a} vs scan {b}", x.as_slice()));
            }
        }
        queries += xs.len();
    }
    Ok(format!("{queries} queries, index == scan bit-exactly"))
}

/// `f_net(x) >= f_C(x) >= f(x)` on every test point, for a verified net.
pub fn guarantee_chain(net: &Mlp, cover: &Cover, test: &TestSet) -> Check {
    let f_c = LookupSurrogate::from_cover(cover).map_err(|e| e.to_string())?;
    let mut pred = net_predictor(net);
    for (x, y) in test.iter() {
        let c = f_c.eval(x).map_err(|e| e.to_string())?;
        let n = pred(x);
        if !(n >= c && c >= y) {
            return Err(format!("at {x:?}: net {n}, f_C {c}, f {y}"));
        }
    }
    Ok(format!("f_net >= f_C >= f on {} test points", test.len()))
}

/// A single uncleared Majoring Point fails verification.
pub fn verify_exactness() -> Check {
    let mut net = Mlp::init(1, 1, 2, 1.0, 0).unwrap();
    net.set_params_flat(&vec![0.0; net.param_count()]).unwrap();
    let net = MonotoneMlp::try_from_mlp(net).unwrap();
    let level = net.forward(&[0.0]).unwrap();
    let mk = |b: f64, i: usize| MajoringPoint {
        a: Point::new(vec![i as f64]).unwrap(),
        b,
    };
    let ok: Vec<MajoringPoint> = (0..50).map(|i| mk(level, i)).collect();
    let pass = verify_samples(&net, &MajoringPointSet::new(1, ok.clone(), CoverMode::Grid).unwrap());
    if !pass.pass {
        return Err("points exactly at the network value must pass".into());
    }
    for i in [0, 25, 49] {
        let mut bad = ok.clone();
        bad[i].b = f64::from_bits(level.to_bits() + 1);
        let r = verify_samples(&net, &MajoringPointSet::new(1, bad, CoverMode::Grid).unwrap());
        if r.pass || r.violations != 1 {
            return Err(format!("one-ulp violation at {i} not detected"));
        }
    }
    Ok("a one-ulp violation on any single point fails verification".into())
}

/// Adaptive runs never exceed the round bound.
pub fn termination() -> Check {
    let mut runs = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for d in 1..=3 {
        let oracle = sum_oracle(d);
        for _ in 0..8 {
            let eps = rng.gen_range(0.02..0.5) / d as f64;
            let eps_f = rng.gen_range(0.0..1.0);
            let cover = build_adaptive_cover_fn(oracle.domain(), &oracle, AdaptiveParams::new(eps, eps_f, 0).unwrap())
                .map_err(|e| e.to_string())?;
            let bound = max_rounds(oracle.domain(), eps);
            if cover.rounds() > bound {
                return Err(format!("d={d} eps={eps}: {} rounds > bound {bound}", cover.rounds()));
            }
            runs += 1;
        }
    }
    let f1 = Synthetic::F1.oracle();
    for eps in [0.001, 0.01, 0.1, 1.0] {
        let cover = build_adaptive_cover_fn(f1.domain(), &f1, AdaptiveParams::new(eps, 0.0, 0).unwrap()).unwrap();
        if cover.rounds() > max_rounds(f1.domain(), eps) {
            return Err(format!("f1 eps={eps}: {} rounds", cover.rounds()));
        }
        runs += 1;
    }
    Ok(format!("{runs} runs within the round bound"))
}

/// Grid Majoring Points of f1 at `eps`.
pub fn f1_grid(eps: f64) -> (FunctionOracle, Cover, MajoringPointSet) {
    let oracle = Synthetic::F1.oracle();
    let mut cover = build_grid_cover(oracle.domain(), eps).unwrap();
    cover.annotate_fn(&oracle).unwrap();
    let pts = majoring_points_from_cover_fn(&cover, &oracle).unwrap();
    (oracle, cover, pts)
}
