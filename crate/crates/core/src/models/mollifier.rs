//! Smooth cutoffs built from the classical exp(-1/y) step, gating the
//! oscillatory forcing off near window boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// C-infinity step: 0 for u <= 0, 1 for u >= 1, strictly monotone between,
/// with value 1/2 at u = 1/2.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// One-dimensional mollifier: exactly 0 on each listed closed interval,
/// exactly 1 once `delta` past the outermost interval edges, smooth between.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mollifier {
    zero_intervals: Vec<(f64, f64)>,
    delta: f64,
}

impl Mollifier {
    pub fn new(zero_intervals: Vec<(f64, f64)>, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "mollifier transition width must be positive, got {delta}"
            )));
        }
        let mut sorted = zero_intervals.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for iv in &sorted {
            if !(iv.0 <= iv.1) {
                return Err(Error::InvalidInput(format!(
                    "degenerate zero interval [{}, {}]",
                    iv.0, iv.1
                )));
            }
        }
        for pair in sorted.windows(2) {
            if pair[1].0 - pair[0].1 < 2.0 * delta {
                return Err(Error::InvalidInput(
                    "zero intervals too close for the transition width".into(),
                ));
            }
        }
        Ok(Self {
            zero_intervals: sorted,
            delta,
        })
    }

    /// Zero plateau of half-width `half` around `center`, reaching 1 at
    /// distance `half + delta`.
    pub fn around(center: f64, half: f64, delta: f64) -> Result<Self> {
        Self::new(vec![(center - half, center + half)], delta)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn zero_intervals(&self) -> &[(f64, f64)] {
        &self.zero_intervals
    }

    pub fn eval(&self, y: f64) -> f64 {
        let mut v = 1.0;
        for &(a, b) in &self.zero_intervals {
            let factor = if y < a {
                smooth_step((a - y) / self.delta)
            } else if y > b {
                smooth_step((y - b) / self.delta)
            } else {
                0.0
            };
            v *= factor;
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }
}

/// Gate sigma(x, xdot) of the mollified pendulum: zero only where both the
/// position and velocity mollifiers vanish, one where either is one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PendulumGate {
    pub position: Mollifier,
    pub velocity: Mollifier,
}

impl PendulumGate {
    /// Plateau layout matching the mollified pendulum equation: forcing off
    /// for x within delta/2 of 0 or pi while |xdot| <= delta/2, fully on once
    /// x is delta away from both or |xdot| >= delta.
    pub fn standard(delta: f64) -> Result<Self> {
        let h = delta / 2.0;
        Ok(Self {
            position: Mollifier::new(
                vec![(-h, h), (std::f64::consts::PI - h, std::f64::consts::PI + h)],
                h,
            )?,
            velocity: Mollifier::around(0.0, h, h)?,
        })
    }

    pub fn eval(&self, x: f64, xdot: f64) -> f64 {
        1.0 - (1.0 - self.position.eval(x)) * (1.0 - self.velocity.eval(xdot))
    }
}
