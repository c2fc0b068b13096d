//! Metrics table: f_C, the certified network and two shifted-target
//! baselines, produced by the experiment driver.
//!
//! Pass a spec file to run it instead: `cargo run --release --example
//! baselines -- spec.json`.

use majoring::cover::CoverMode;
use majoring::eval::{run_experiment, run_experiment_file, ExperimentSpec, MetricsReport, MethodSpec};
use majoring::network::TrainConfig;
use majoring::oracle::Synthetic;

pub fn quick_spec() -> ExperimentSpec {
    ExperimentSpec {
        name: "baselines".into(),
        function: Some(Synthetic::F1),
        dataset: None,
        domain: None,
        n_samples: None,
        methods: vec![MethodSpec {
            label: "grid".into(),
            mode: CoverMode::Grid,
            eps: 0.5,
            eps_f: None,
            n_p: None,
            train: true,
        }],
        deltas: vec![0.0, 0.5],
        train: TrainConfig {
            epochs: 1000,
            batch_size: 16,
            ..TrainConfig::default()
        },
        n_test: 20_000,
        seed: 0,
        out_dir: None,
        curve_points: 401,
        probe_pairs: 2000,
    }
}

fn print_table(rows: &[MetricsReport]) {
    println!("{:<14} {:>5} {:>8} {:>8} {:>8} {:>6} {:>5}", "method", "m", "mae", "rmse", "op%", "fg", "viol");
    for r in rows {
        let mae = r.mae.map_or("n/a".into(), |v| format!("{v:.4}"));
        let viol = r.monotonicity_violations.map_or("-".into(), |v| v.to_string());
        println!(
            "{:<14} {:>5} {:>8} {:>8.4} {:>8.3} {:>6} {:>5}",
            r.method, r.m, mae, r.rmse, r.op_percent, r.fg, viol
        );
    }
}

pub fn run_example() -> majoring::Result<Vec<MetricsReport>> {
    let dir = std::env::temp_dir().join(format!("majoring-baselines-{}", std::process::id()));
    let result = run_experiment(&quick_spec(), Some(&dir))?;
    std::fs::remove_dir_all(&dir)?;
    print_table(&result.rows);
    Ok(result.rows)
}

#[allow(dead_code)]
fn main() -> majoring::Result<()> {
    match std::env::args().nth(1) {
        Some(spec) => {
            let result = run_experiment_file(spec, None)?;
            print_table(&result.rows);
            println!("outputs in {}", result.out_dir.display());
        }
        None => {
            run_example()?;
        }
    }
    Ok(())
}
