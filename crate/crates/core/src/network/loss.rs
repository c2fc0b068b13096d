use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the asymmetric loss
///
/// ```text
/// l(t) = alpha_plus  * (t - beta)^2     if t >= beta
///        alpha_minus * |t - beta|^p     if t <  beta
/// ```
///
/// applied to residuals `t = f_net(a_i) - b_i`. With `alpha_minus` much
/// larger than `alpha_plus`, falling below `b_i + beta` costs far more than
/// overshooting it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub beta: f64,
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub p: u32,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams {
            beta: 0.1,
            alpha_plus: 1.0,
            alpha_minus: 100.0,
            p: 2,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.beta, self.alpha_plus, self.alpha_minus]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !ok || self.p == 0 {
            return Err(Error::InvalidParameter(format!("invalid loss parameters {self:?}")));
        }
        Ok(())
    }

    /// Whether the parameters meet the preconditions under which a large
    /// enough network provably clears every Majoring Point.
    pub fn supports_guarantee(&self) -> bool {
        self.beta > 0.0 && self.alpha_minus > 0.0
    }
}

/// Value of the asymmetric loss at residual `t`.
pub fn asym_loss(t: f64, lp: &LossParams) -> f64 {
    let u = t - lp.beta;
    if u >= 0.0 {
        lp.alpha_plus * u * u
    } else {
        lp.alpha_minus * (-u).powi(lp.p as i32)
    }
}

/// Derivative of [`asym_loss`]; at the knee (`t == beta`) it is 0, which
/// for `p = 1` is the chosen subgradient.
pub fn asym_loss_deriv(t: f64, lp: &LossParams) -> f64 {
    let u = t - lp.beta;
    if u > 0.0 {
        2.0 * lp.alpha_plus * u
    } else if u < 0.0 {
        let p = lp.p as i32;
        -lp.alpha_minus * p as f64 * (-u).powi(p - 1)
    } else {
        0.0
    }
}

/// Per-sample training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Objective {
    Asymmetric(LossParams),
    /// Plain `(t)^2`, used by the shifted-target baselines.
    Squared,
}

impl Objective {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Objective::Asymmetric(lp) => asym_loss(t, lp),
            Objective::Squared => t * t,
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            Objective::Asymmetric(lp) => asym_loss_deriv(t, lp),
            Objective::Squared => 2.0 * t,
        }
    }
}
