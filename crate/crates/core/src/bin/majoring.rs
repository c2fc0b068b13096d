use std::error::Error as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use majoring::cover::{
    build_adaptive_cover_data, build_adaptive_cover_fn, build_grid_cover, majoring_points_from_cover_data,
    majoring_points_from_cover_fn, AdaptiveParams, Cover, CoverMode, MajoringPointSet,
};
use majoring::eval::{
    mae, mean_signed_error, monotonicity_probe, net_predictor, op_metric, rmse, run_experiment_file,
    write_metrics_csv, MetricsReport, TestSet, DEFAULT_TEST_POINTS,
};
use majoring::geometry::Domain;
use majoring::network::{
    model_load, model_save, train_until_verified, verify_samples, Architecture, SavedModel,
    TrainConfig, TrainError,
};
use majoring::oracle::{dataset_load, Dataset, FunctionOracle, Synthetic};
use majoring::{Error, Result};

/// Certified over-estimating surrogates from Majoring Points.
#[derive(Parser)]
#[command(name = "majoring", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a built-in function uniformly into a CSV dataset.
    GenData {
        #[arg(long)]
        function: Synthetic,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a grid or adaptive cover.
    Cover {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "grid")]
        mode: Mode,
        #[command(flatten)]
        params: CoverArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a cover into Majoring Points.
    Points {
        #[arg(long)]
        cover: PathBuf,
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a monotone network on Majoring Points and verify it.
    Train {
        #[arg(long)]
        points: PathBuf,
        /// Domain stored in the model (defaults to the function's domain).
        #[arg(long, allow_hyphen_values = true, value_parser = parse_domain)]
        domain: Option<Domain>,
        #[arg(long)]
        function: Option<Synthetic>,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check a model against Majoring Points; exits nonzero on failure.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Where to write the model with the new report (defaults to --model).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test-set metrics of a model against a built-in function.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        function: Synthetic,
        /// Majoring Points, for the MAE column.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TEST_POINTS)]
        n_test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment spec end to end.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a verified model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated coordinates; repeat for several points.
        #[arg(long = "x", required = true, allow_hyphen_values = true, value_parser = parse_coords)]
        xs: Vec<Vec<f64>>,
        /// Serve a model without a passing verification report.
        #[arg(long)]
        unverified: bool,
        /// Evaluate outside the domain (no guarantee there).
        #[arg(long)]
        extrapolate: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    #[arg(long)]
    function: Option<Synthetic>,
    /// CSV dataset with columns x1..xd,f.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Per-axis bounds, e.g. `-10..10` or `0..15,0..15`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_domain)]
    domain: Option<Domain>,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long)]
    eps_f: Option<f64>,
    #[arg(long = "np")]
    n_p: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// TrainConfig JSON; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha_plus: Option<f64>,
    #[arg(long)]
    alpha_minus: Option<f64>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    Grid,
    FunctionAdapted,
    DataAdapted,
}

fn parse_domain(s: &str) -> std::result::Result<Domain, String> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for axis in s.split(',') {
        let (a, b) = axis
            .split_once("..")
            .ok_or_else(|| format!("expected ymin..ymax, got `{axis}`"))?;
        lo.push(a.trim().parse::<f64>().map_err(|e| e.to_string())?);
        hi.push(b.trim().parse::<f64>().map_err(|e| e.to_string())?);
    }
    Domain::new(lo, hi).map_err(|e| e.to_string())
}

fn parse_coords(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect()
}

impl Source {
    fn domain(&self) -> Result<Domain> {
        match (&self.domain, self.function) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(f)) => Ok(f.domain()),
            (None, None) => Err(Error::InvalidParameter("--domain is required without --function".into())),
        }
    }

    fn oracle(&self) -> Option<FunctionOracle> {
        self.function.map(Synthetic::oracle)
    }

    fn dataset(&self, domain: &Domain) -> Result<Option<Dataset>> {
        self.data.as_ref().map(|p| dataset_load(p, domain)).transpose()
    }
}

impl TrainArgs {
    fn config(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => serde_json::from_reader(File::open(p)?)?,
            None => TrainConfig::default(),
        };
        let loss = &mut cfg.loss;
        set(&mut loss.beta, self.beta);
        set(&mut loss.alpha_plus, self.alpha_plus);
        set(&mut loss.alpha_minus, self.alpha_minus);
        set(&mut loss.p, self.p);
        let Architecture { width, depth, theta } = &mut cfg.arch;
        set(width, self.width);
        set(depth, self.depth);
        set(theta, self.theta);
        set(&mut cfg.epochs, self.epochs);
        set(&mut cfg.lr, self.lr);
        set(&mut cfg.seed, self.seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = e.source();
            while let Some(s) = src {
                if !msg.ends_with(&s.to_string()) {
                    msg.push_str(&format!("\n  caused by: {s}"));
                }
                src = s.source();
            }
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}

/// Exit status when a certificate check fails.
const NOT_VERIFIED: u8 = 2;

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::GenData { function, n, seed, out } => {
            let data = Dataset::sample(&function.oracle(), n, seed)?;
            data.save(&out)?;
            println!("wrote {} samples of {function} to {}", data.len(), out.display());
        }
        Command::Cover {
            source,
            mode,
            params,
            out,
        } => {
            let domain = source.domain()?;
            let cover = build_cover(&source, &domain, mode, &params)?;
            cover.save(&out)?;
            println!("{} cells, {} rounds -> {}", cover.len(), cover.rounds(), out.display());
        }
        Command::Points { cover, source, out } => {
            let cover = Cover::load(&cover)?;
            let pts = points_for(&cover, &source)?;
            pts.save(&out)?;
            println!(
                "{} Majoring Points ({} cells dropped, uncovered volume {:.3e}) -> {}",
                pts.len(),
                pts.dropped(),
                pts.uncovered_fraction(),
                out.display()
            );
        }
        Command::Train {
            points,
            domain,
            function,
            train,
            out,
        } => {
            let cfg = train.config()?;
            let domain = domain.or(function.map(Synthetic::domain));
            let pts = MajoringPointSet::load(&points, CoverMode::Grid)?;
            if let Some(d) = &domain {
                if d.dim() != pts.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: d.dim(),
                        got: pts.dim(),
                    });
                }
            }
            let (outcome, verified) = match train_until_verified(&pts, &cfg) {
                Ok(o) => (o, true),
                Err(TrainError::Exhausted { best, .. }) => (*best, false),
                Err(TrainError::Failed(e)) => return Err(e),
            };
            let r = &outcome.report;
            println!(
                "attempts {}, violations {}/{}, min margin {:.6}",
                r.history.len(),
                r.violations,
                r.m,
                r.min_margin
            );
            model_save(&SavedModel::monotone(outcome.net, domain, Some(outcome.report)), &out)?;
            if !verified {
                eprintln!("verification FAILED; model written without a certificate to {}", out.display());
                return Ok(ExitCode::from(NOT_VERIFIED));
            }
            println!("verified model -> {}", out.display());
        }
        Command::Verify { model, points, out } => {
            let mut saved = model_load(&model)?;
            let pts = MajoringPointSet::load(&points, CoverMode::Grid)?;
            let report = verify_samples(&saved.net, &pts);
            let pass = report.pass && saved.monotone && saved.net.has_nonneg_weights();
            println!(
                "m {}, violations {}, min margin {:.6}, monotone {} -> {}",
                report.m,
                report.violations,
                report.min_margin,
                saved.monotone,
                if pass { "PASS" } else { "FAIL" }
            );
            saved.verification = Some(report);
            model_save(&saved, out.as_deref().unwrap_or(&model))?;
            if !pass {
                return Ok(ExitCode::from(NOT_VERIFIED));
            }
        }
        Command::Eval {
            model,
            function,
            points,
            n_test,
            seed,
            out,
        } => {
            let saved = model_load(&model)?;
            let oracle = function.oracle();
            let test = TestSet::uniform(&oracle, n_test, seed)?;
            let pts = points.map(|p| MajoringPointSet::load(p, CoverMode::Grid)).transpose()?;
            let row = MetricsReport {
                method: model.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned()),
                m: pts.as_ref().map_or(0, |p| p.len()),
                n_test,
                seed,
                mae: pts.as_ref().map(|p| mae(p, &oracle)),
                rmse: rmse(net_predictor(&saved.net), &test),
                mean_signed_error: mean_signed_error(net_predictor(&saved.net), &test),
                op_percent: op_metric(net_predictor(&saved.net), &test),
                fg: saved.is_certified(),
                monotonicity_violations: Some(monotonicity_probe(
                    net_predictor(&saved.net),
                    oracle.domain(),
                    10_000,
                    seed,
                )?),
                stored_floats: saved.net.stored_float_count(),
                uncovered_fraction: 0.0,
            };
            write_metrics_csv(std::slice::from_ref(&row), BufWriter::new(File::create(&out)?))?;
            println!(
                "rmse {:.6}, op {:.3}%, fg {} -> {}",
                row.rmse,
                row.op_percent,
                row.fg,
                out.display()
            );
        }
        Command::Run { spec, out } => {
            let result = run_experiment_file(&spec, out.as_deref())?;
            let mut stdout = std::io::stdout().lock();
            write_metrics_csv(&result.rows, &mut stdout)?;
            writeln!(stdout, "outputs in {}", result.out_dir.display())?;
        }
        Command::Predict {
            model,
            xs,
            unverified,
            extrapolate,
            out,
        } => return predict(&model, &xs, unverified, extrapolate, out.as_deref()),
    }
    Ok(ExitCode::SUCCESS)
}

fn build_cover(source: &Source, domain: &Domain, mode: Mode, p: &CoverArgs) -> Result<Cover> {
    let need = |name: &str| Error::InvalidParameter(format!("this mode needs --{name}"));
    match mode {
        Mode::Grid => build_grid_cover(domain, p.eps),
        Mode::FunctionAdapted => {
            let oracle = source.oracle().ok_or_else(|| need("function"))?;
            let eps_f = p.eps_f.ok_or_else(|| need("eps-f"))?;
            build_adaptive_cover_fn(domain, &oracle, AdaptiveParams::new(p.eps, eps_f, p.n_p.unwrap_or(0))?)
        }
        Mode::DataAdapted => {
            let data = source.dataset(domain)?.ok_or_else(|| need("data"))?;
            let eps_f = p.eps_f.ok_or_else(|| need("eps-f"))?;
            let n_p = p.n_p.ok_or_else(|| need("np"))?;
            build_adaptive_cover_data(domain, &data, AdaptiveParams::new(p.eps, eps_f, n_p)?)
        }
    }
}

fn points_for(cover: &Cover, source: &Source) -> Result<MajoringPointSet> {
    if let Some(path) = &source.data {
        let data = dataset_load(path, cover.domain())?;
        return majoring_points_from_cover_data(cover, &data);
    }
    match source.oracle() {
        Some(o) => majoring_points_from_cover_fn(cover, &o),
        None => Err(Error::InvalidParameter("points need --function or --data".into())),
    }
}

fn predict(model: &Path, xs: &[Vec<f64>], unverified: bool, extrapolate: bool, out: Option<&Path>) -> Result<ExitCode> {
    let saved = model_load(model)?;
    if !saved.is_certified() && !unverified {
        eprintln!("refusing: model has no passing verification report (pass --unverified to override)");
        return Ok(ExitCode::from(NOT_VERIFIED));
    }
    let mut lines = Vec::with_capacity(xs.len());
    for x in xs {
        if x.len() != saved.net.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: saved.net.input_dim(),
                got: x.len(),
            });
        }
        let inside = match &saved.domain {
            Some(d) => d.contains(x)?,
            None => false,
        };
        if !inside {
            if !extrapolate {
                eprintln!("refusing: {x:?} is outside the model's domain, where no guarantee holds (pass --extrapolate to override)");
                return Ok(ExitCode::FAILURE);
            }
            eprintln!("warning: {x:?} is outside the domain; the value carries no guarantee");
        }
        let y = saved.net.forward(x)?;
        lines.push(serde_json::json!({ "x": x, "y": y, "in_domain": inside }).to_string());
    }
    let text = lines.join("\n") + "\n";
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, text)?;
    }
    Ok(ExitCode::SUCCESS)
}
