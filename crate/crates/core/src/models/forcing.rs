//! Named forcing catalog: zero, constants, sinusoids and sums thereof, with
//! analytic derivatives and periods. No runtime expression parsing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

pub const MAX_SUM_TERMS: usize = 4;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingExpr {
    Zero,
    Const { c: f64 },
    Sin { a: f64, omega: f64, phase: f64 },
    Cos { a: f64, omega: f64, phase: f64 },
    Sum { terms: Vec<ForcingExpr> },
}

impl ForcingExpr {
    pub fn sin(a: f64, omega: f64, phase: f64) -> Self {
        ForcingExpr::Sin { a, omega, phase }
    }

    pub fn cos(a: f64, omega: f64, phase: f64) -> Self {
        ForcingExpr::Cos { a, omega, phase }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ForcingExpr::Zero => Ok(()),
            ForcingExpr::Const { c } => {
                if c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput("non-finite constant forcing".into()))
                }
            }
            ForcingExpr::Sin { a, omega, phase } | ForcingExpr::Cos { a, omega, phase } => {
                if !(a.is_finite() && omega.is_finite() && phase.is_finite()) {
                    return Err(Error::InvalidInput("non-finite sinusoid parameter".into()));
                }
                if *omega <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "sinusoid omega must be positive, got {omega}"
                    )));
                }
                Ok(())
            }
            ForcingExpr::Sum { terms } => {
                if terms.is_empty() || terms.len() > MAX_SUM_TERMS {
                    return Err(Error::InvalidInput(format!(
                        "sum must have 1..={MAX_SUM_TERMS} terms, got {}",
                        terms.len()
                    )));
                }
                for t in terms {
                    if matches!(t, ForcingExpr::Sum { .. }) {
                        return Err(Error::InvalidInput("nested sums are not allowed".into()));
                    }
                    t.validate()?;
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ForcingExpr::Zero => 0.0,
            ForcingExpr::Const { c } => *c,
            ForcingExpr::Sin { a, omega, phase } => a * (omega * t + phase).sin(),
            ForcingExpr::Cos { a, omega, phase } => a * (omega * t + phase).cos(),
            ForcingExpr::Sum { terms } => terms.iter().map(|f| f.eval(t)).sum(),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            ForcingExpr::Zero | ForcingExpr::Const { .. } => 0.0,
            ForcingExpr::Sin { a, omega, phase } => a * omega * (omega * t + phase).cos(),
            ForcingExpr::Cos { a, omega, phase } => -a * omega * (omega * t + phase).sin(),
            ForcingExpr::Sum { terms } => terms.iter().map(|f| f.deriv(t)).sum(),
        }
    }

    pub fn second_deriv(&self, t: f64) -> f64 {
        match self {
            ForcingExpr::Zero | ForcingExpr::Const { .. } => 0.0,
            ForcingExpr::Sin { a, omega, phase } => -a * omega * omega * (omega * t + phase).sin(),
            ForcingExpr::Cos { a, omega, phase } => -a * omega * omega * (omega * t + phase).cos(),
            ForcingExpr::Sum { terms } => terms.iter().map(|f| f.second_deriv(t)).sum(),
        }
    }

    /// Upper bound on |f(t)|.
    pub fn amplitude_bound(&self) -> f64 {
        match self {
            ForcingExpr::Zero => 0.0,
            ForcingExpr::Const { c } => c.abs(),
            ForcingExpr::Sin { a, .. } | ForcingExpr::Cos { a, .. } => a.abs(),
            ForcingExpr::Sum { terms } => terms.iter().map(|f| f.amplitude_bound()).sum(),
        }
    }

    /// Upper bound on |f'(t)|.
    pub fn deriv_bound(&self) -> f64 {
        match self {
            ForcingExpr::Zero | ForcingExpr::Const { .. } => 0.0,
            ForcingExpr::Sin { a, omega, .. } | ForcingExpr::Cos { a, omega, .. } => {
                (a * omega).abs()
            }
            ForcingExpr::Sum { terms } => terms.iter().map(|f| f.deriv_bound()).sum(),
        }
    }

    /// A (not necessarily minimal) period, or `None` for constants.
    pub fn period(&self) -> Option<f64> {
        match self {
            ForcingExpr::Zero | ForcingExpr::Const { .. } => None,
            ForcingExpr::Sin { omega, .. } | ForcingExpr::Cos { omega, .. } => {
                Some(2.0 * std::f64::consts::PI / omega)
            }
            ForcingExpr::Sum { terms } => {
                let periods: Vec<f64> = terms.iter().filter_map(|f| f.period()).collect();
                if periods.is_empty() {
                    return None;
                }
                crate::periodic::common_period(&periods).ok()
            }
        }
    }

    /// Largest angular frequency appearing in the expression.
    pub fn max_omega(&self) -> f64 {
        match self {
            ForcingExpr::Zero | ForcingExpr::Const { .. } => 0.0,
            ForcingExpr::Sin { omega, .. } | ForcingExpr::Cos { omega, .. } => *omega,
            ForcingExpr::Sum { terms } => terms.iter().map(|f| f.max_omega()).fold(0.0, f64::max),
        }
    }
}

/// Bounded pivot forcing f(t) of the pendulum equation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Forcing {
    pub expr: ForcingExpr,
    pub f_bound: f64,
    pub f_dot_bound: f64,
    pub period: Option<f64>,
}

impl Forcing {
    pub fn new(expr: ForcingExpr) -> Result<Self> {
        expr.validate()?;
        let f_bound = expr.amplitude_bound();
        let f_dot_bound = expr.deriv_bound();
        let period = expr.period();
        let forcing = Self {
            expr,
            f_bound,
            f_dot_bound,
            period,
        };
        forcing.check_bound()?;
        Ok(forcing)
    }

    pub fn zero() -> Self {
        Self::new(ForcingExpr::Zero).expect("zero forcing is valid")
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.expr.eval(t)
    }

    /// Samples |f| on a 1e4-point grid over one period (or [0, 100]).
    fn check_bound(&self) -> Result<()> {
        let span = self.period.unwrap_or(100.0);
        for k in 0..10_000 {
            let t = span * k as f64 / 10_000.0;
            if self.eval(t).abs() > self.f_bound * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::InvalidInput(format!(
                    "|f({t})| exceeds declared bound {}",
                    self.f_bound
                )));
            }
        }
        Ok(())
    }
}

/// Zero-mean periodic forcing g together with its frequency multiplier.
/// The field factories evaluate it as g(lambda * t).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OscillatoryForcing {
    pub expr: ForcingExpr,
    pub period: f64,
    pub lambda: f64,
}

impl OscillatoryForcing {
    pub fn new(expr: ForcingExpr, lambda: f64) -> Result<Self> {
        expr.validate()?;
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let period = expr
            .period()
            .ok_or_else(|| Error::InvalidInput("oscillatory forcing must be periodic".into()))?;
        let s = Self {
            expr,
            period,
            lambda,
        };
        s.check_periodic()?;
        s.check_zero_mean()?;
        Ok(s)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.expr.eval(self.lambda * t)
    }

    pub fn mean(&self) -> Result<f64> {
        let expr = self.expr.clone();
        Ok(adaptive_simpson(|t| expr.eval(t), 0.0, self.period, 1e-13)? / self.period)
    }

    fn check_periodic(&self) -> Result<()> {
        for k in 0..128 {
            let t = self.period * (k as f64 / 128.0 - 0.5);
            if (self.expr.eval(t) - self.expr.eval(t + self.period)).abs() > 1e-9 {
                return Err(Error::InvalidInput(
                    "forcing is not periodic with its declared period".into(),
                ));
            }
        }
        Ok(())
    }

    fn check_zero_mean(&self) -> Result<()> {
        let mean = self.mean()?;
        if mean.abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "oscillatory forcing must have zero mean, got {mean:e}"
            )));
        }
        Ok(())
    }

    /// The fastest angular frequency of t -> g(lambda t), used as the
    /// integrator's step-cap hint.
    pub fn omega_max(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.lambda / self.period
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn catalog_eval_and_derivatives() {
        let f = ForcingExpr::Sum {
            terms: vec![ForcingExpr::cos(0.5, 1.0, 0.0), ForcingExpr::sin(2.0, 3.0, 0.1)],
        };
        f.validate().unwrap();
        let t = 0.7;
        assert!((f.eval(t) - (0.5 * t.cos() + 2.0 * (3.0 * t + 0.1).sin())).abs() < 1e-15);
        assert!((f.deriv(t) - (-0.5 * t.sin() + 6.0 * (3.0 * t + 0.1).cos())).abs() < 1e-14);
        assert!((f.amplitude_bound() - 2.5).abs() < 1e-15);
        assert!((f.max_omega() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn sum_period_is_common_period() {
        let f = ForcingExpr::Sum {
            terms: vec![ForcingExpr::sin(1.0, 1.0, 0.0), ForcingExpr::sin(1.0, 2.0, 0.0)],
        };
        assert!((f.period().unwrap() - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn zero_mean_enforced() {
        assert!(OscillatoryForcing::new(ForcingExpr::sin(1.0, 1.0, 0.0), 10.0).is_ok());
        // cos^2-like shifted sinusoid has nonzero mean only via a Const term,
        // which has no period, so model it as sin + const: rejected.
        let biased = ForcingExpr::Sum {
            terms: vec![ForcingExpr::sin(1.0, 1.0, 0.0), ForcingExpr::Const { c: 0.2 }],
        };
        assert!(OscillatoryForcing::new(biased, 10.0).is_err());
    }

    #[test]
    fn too_many_terms_rejected() {
        let terms = vec![ForcingExpr::sin(1.0, 1.0, 0.0); 5];
        assert!(ForcingExpr::Sum { terms }.validate().is_err());
    }
}
