//! Post-training certificate: a monotone network that clears every
//! Majoring Point over-estimates the reference function on the covered
//! domain.

use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MonotoneMlp, Scratch};
use super::train::{train, Architecture, LossTrace, TrainConfig};
use crate::cover::MajoringPointSet;
use crate::error::Error;

/// One train-and-verify attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: usize,
    pub arch: Architecture,
    pub seed: u64,
    pub epochs: usize,
    pub final_objective: f64,
    pub violations: usize,
    pub min_margin: f64,
}

/// Margins `f_net(a_i) - b_i` computed with the deployed forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub m: usize,
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub violations: usize,
    pub pass: bool,
    #[serde(default)]
    pub history: Vec<AttemptRecord>,
}

impl VerificationReport {
    /// Checks the report is internally consistent (it may have been edited
    /// on disk).
    pub fn is_consistent(&self) -> bool {
        let violations = self.margins.iter().filter(|m| !(**m >= 0.0)).count();
        let min = self.margins.iter().copied().fold(f64::INFINITY, f64::min);
        self.m == self.margins.len()
            && self.violations == violations
            && self.pass == (violations == 0 && self.m > 0)
            && (self.m == 0 || min.to_bits() == self.min_margin.to_bits())
    }
}

/// Exact check `f_net(a_i) >= b_i` for every point. Works for any network;
/// only a monotone one turns a pass into a domain-wide guarantee.
pub fn verify_samples(net: &Mlp, pts: &MajoringPointSet) -> VerificationReport {
    let mut scratch = Scratch::default();
    let margins: Vec<f64> = pts.iter().map(|p| net.forward_with(&p.a, &mut scratch) - p.b).collect();
    // NaN margins count as violations
    let violations = margins.iter().filter(|m| !(**m >= 0.0)).count();
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    VerificationReport {
        m: margins.len(),
        margins,
        min_margin,
        violations,
        pass: violations == 0 && !pts.is_empty(),
        history: Vec::new(),
    }
}

/// A trained network with its verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub net: MonotoneMlp,
    pub report: VerificationReport,
    pub trace: LossTrace,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Failed(#[from] Error),

    /// Every attempt left at least one Majoring Point uncleared. `best` is
    /// the attempt with the fewest violations; it carries no certificate.
    #[error("no verified network after {attempts} attempts ({} violations in the best one)", best.report.violations)]
    Exhausted { attempts: usize, best: Box<TrainOutcome> },
}

/// Trains, verifies, and on failure grows the network and retrains with a
/// fresh seed, up to `cfg.grow.max_attempts` attempts.
pub fn train_until_verified(pts: &MajoringPointSet, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let mut history = Vec::new();
    let mut best: Option<TrainOutcome> = None;
    for k in 0..cfg.grow.max_attempts {
        let arch = cfg.grow.architecture(cfg.arch, k);
        let seed = cfg.seed.wrapping_add(k as u64);
        let attempt_cfg = TrainConfig {
            arch,
            seed,
            ..cfg.clone()
        };
        let net = MonotoneMlp::init(pts.dim(), arch.depth, arch.width, arch.theta, seed)?;
        let (net, trace) = train(net, pts, &attempt_cfg)?;
        let mut report = verify_samples(&net, pts);
        history.push(AttemptRecord {
            attempt: k,
            arch,
            seed,
            epochs: cfg.epochs,
            final_objective: trace.final_objective,
            violations: report.violations,
            min_margin: report.min_margin,
        });
        report.history = history.clone();
        let outcome = TrainOutcome { net, report, trace };
        if outcome.report.pass {
            return Ok(outcome);
        }
        let better = best.as_ref().is_none_or(|b| {
            (outcome.report.violations, -outcome.report.min_margin) < (b.report.violations, -b.report.min_margin)
        });
        if better {
            best = Some(outcome);
        }
    }
    let mut best = best.expect("at least one attempt ran");
    best.report.history = history;
    Err(TrainError::Exhausted {
        attempts: cfg.grow.max_attempts,
        best: Box::new(best),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{CoverMode, MajoringPoint};
    use crate::geometry::Point;
    use crate::network::GrowPolicy;

    fn set(points: &[(f64, f64)]) -> MajoringPointSet {
        let pts = points
            .iter()
            .map(|&(a, b)| MajoringPoint {
                a: Point::new(vec![a]).unwrap(),
                b,
            })
            .collect();
        MajoringPointSet::new(1, pts, CoverMode::Grid).unwrap()
    }

    fn constant_net(c: f64) -> MonotoneMlp {
        let mut net = Mlp::init(1, 1, 2, 1.0, 0).unwrap();
        net.set_params_flat(&vec![0.0; net.param_count()]).unwrap();
        let mut net = MonotoneMlp::try_from_mlp(net).unwrap();
        net.shift_output_bias(c);
        net
    }

    #[test]
    fn constant_networks() {
        let pts = set(&[(0.0, -1.0), (0.5, 2.0), (1.0, 3.0)]);
        let hi = verify_samples(&constant_net(4.0), &pts);
        assert!(hi.pass);
        assert!(hi.min_margin >= 1.0);
        assert!(hi.is_consistent());
        let lo = verify_samples(&constant_net(-2.0), &pts);
        assert!(!lo.pass);
        assert_eq!(lo.violations, 3);
        assert!(lo.is_consistent());
    }

    #[test]
    fn single_violation_fails() {
        let pts = set(&[(0.0, 0.0), (0.5, 0.0), (1.0, 1.0 + 1e-12)]);
        let r = verify_samples(&constant_net(1.0), &pts);
        assert_eq!(r.violations, 1);
        assert!(!r.pass);
    }

    #[test]
    fn constant_function_verifies_first_time() {
        let pts = set(&(0..10).map(|i| (i as f64 / 9.0, 3.0)).collect::<Vec<_>>());
        let cfg = TrainConfig {
            arch: Architecture {
                depth: 1,
                width: 4,
                theta: 1.0,
            },
            epochs: 1000,
            batch_size: 10,
            ..TrainConfig::default()
        };
        let out = train_until_verified(&pts, &cfg).unwrap();
        assert!(out.report.pass);
        assert_eq!(out.report.history.len(), 1);
    }

    #[test]
    fn tiny_budget_fails_explicitly() {
        let pts = set(&(0..30).map(|i| (i as f64 / 29.0, if i < 15 { 0.0 } else { 50.0 })).collect::<Vec<_>>());
        let cfg = TrainConfig {
            arch: Architecture {
                depth: 1,
                width: 2,
                theta: 1.0,
            },
            epochs: 1,
            lr: 1e-6,
            lr_final: 1e-6,
            grow: GrowPolicy {
                max_attempts: 2,
                ..GrowPolicy::default()
            },
            ..TrainConfig::default()
        };
        match train_until_verified(&pts, &cfg) {
            Err(TrainError::Exhausted { attempts, best }) => {
                assert_eq!(attempts, 2);
                assert!(!best.report.pass);
                assert_eq!(best.report.history.len(), 2);
                assert_eq!(best.report.history[1].arch.width, 4);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }
}
