//! Topological shooting: classifies boundary exits and bisects an
//! initial-condition segment down to a trajectory that never leaves the
//! window over the requested horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_with_exit, ExitOutcome, State, VectorField, Window};

/// A segment of initial conditions at a common start time, interpolated
/// linearly in the phase components.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Segment {
    pub endpoint_a: State,
    pub endpoint_b: State,
}

impl Segment {
    pub fn new(endpoint_a: State, endpoint_b: State) -> Result<Self> {
        if endpoint_a.t != endpoint_b.t {
            return Err(Error::InvalidInput(
                "segment endpoints must share the same start time".into(),
            ));
        }
        if endpoint_a.dim() != endpoint_b.dim() {
            return Err(Error::InvalidInput(
                "segment endpoints must have the same dimension".into(),
            ));
        }
        Ok(Self {
            endpoint_a,
            endpoint_b,
        })
    }

    pub fn at(&self, xi: f64) -> State {
        let y = self
            .endpoint_a
            .y
            .iter()
            .zip(&self.endpoint_b.y)
            .map(|(a, b)| a + xi * (b - a))
            .collect();
        State::new(self.endpoint_a.t, y)
    }
}

/// One probe of the bisection search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExitProbe {
    pub xi: f64,
    pub outcome: ExitOutcome,
    pub t_exit: Option<f64>,
}

/// Output of the Ważewski bisection: the bracketing parameters, the surviving
/// (or best-bracketed) initial condition, and the full probe log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalCertificate {
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub side_lo: ExitOutcome,
    pub side_hi: ExitOutcome,
    pub xi_star: f64,
    /// Classification of `xi_star` itself; `Survived` when a probe survived,
    /// otherwise the honest outcome of the final midpoint.
    pub outcome_star: ExitOutcome,
    pub ic_star: State,
    pub t_max: f64,
    pub bracket_width: f64,
    pub tol: f64,
    pub exit_log: Vec<ExitProbe>,
}

/// Classifies the exit side of the solution from `ic`, or `Survived` when it
/// stays inside the window until `t_max`.
pub fn classify_exit(
    field: &VectorField,
    ic: &State,
    window: &Window,
    t_max: f64,
    tol: f64,
) -> Result<ExitOutcome> {
    Ok(integrate_with_exit(field, ic, t_max, window, tol)?.outcome)
}

/// Bisects the segment parameter, maintaining an opposite-exit-side bracket,
/// until a probe survives or the bracket is narrower than `xi_tol`.
pub fn bisect_survivor(
    field: &VectorField,
    segment: &Segment,
    window: &Window,
    t_max: f64,
    xi_tol: f64,
    tol: f64,
) -> Result<SurvivalCertificate> {
    if !(xi_tol > 0.0) {
        return Err(Error::InvalidInput(format!("xi_tol must be positive: {xi_tol}")));
    }
    let mut log = Vec::new();
    let probe = |xi: f64, log: &mut Vec<ExitProbe>| -> Result<(ExitOutcome, Option<f64>)> {
        let rep = integrate_with_exit(field, &segment.at(xi), t_max, window, tol)?;
        log.push(ExitProbe {
            xi,
            outcome: rep.outcome,
            t_exit: rep.t_exit,
        });
        Ok((rep.outcome, rep.t_exit))
    };
    let (side_a, _) = probe(0.0, &mut log)?;
    let (side_b, _) = probe(1.0, &mut log)?;
    match (side_a, side_b) {
        (ExitOutcome::Survived, _) | (_, ExitOutcome::Survived) => {
            // An endpoint already survives; report it directly.
            let (xi_star, outcome) = if side_a == ExitOutcome::Survived {
                (0.0, side_a)
            } else {
                (1.0, side_b)
            };
            return Ok(SurvivalCertificate {
                xi_lo: 0.0,
                xi_hi: 1.0,
                side_lo: side_a,
                side_hi: side_b,
                xi_star,
                outcome_star: outcome,
                ic_star: segment.at(xi_star),
                t_max,
                bracket_width: 1.0,
                tol,
                exit_log: log,
            });
        }
        (a, b) if a == b => return Err(Error::EndpointsSameSide),
        _ => {}
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let (side_lo, side_hi) = (side_a, side_b);
    while hi - lo >= xi_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // parameter resolution exhausted
        }
        let (outcome, _) = probe(mid, &mut log)?;
        match outcome {
            ExitOutcome::Survived => {
                return Ok(SurvivalCertificate {
                    xi_lo: lo,
                    xi_hi: hi,
                    side_lo,
                    side_hi,
                    xi_star: mid,
                    outcome_star: ExitOutcome::Survived,
                    ic_star: segment.at(mid),
                    t_max,
                    bracket_width: hi - lo,
                    tol,
                    exit_log: log,
                });
            }
            o if o == side_lo => lo = mid,
            o if o == side_hi => hi = mid,
            _ => return Err(Error::NoBracketProgress),
        }
    }
    // The bracket collapsed without a surviving probe: report the midpoint
    // with its own classification, never silently promoted to a survivor.
    let xi_star = 0.5 * (lo + hi);
    let (outcome_star, _) = probe(xi_star, &mut log)?;
    Ok(SurvivalCertificate {
        xi_lo: lo,
        xi_hi: hi,
        side_lo,
        side_hi,
        xi_star,
        outcome_star,
        ic_star: segment.at(xi_star),
        t_max,
        bracket_width: hi - lo,
        tol,
        exit_log: log,
    })
}

/// Re-runs the certified initial condition at a tighter tolerance and
/// reports how long it stays inside the window.
pub fn recheck_certificate(
    field: &VectorField,
    cert: &SurvivalCertificate,
    window: &Window,
    tol: f64,
) -> Result<(ExitOutcome, f64)> {
    let rep = integrate_with_exit(field, &cert.ic_star, cert.t_max, window, tol)?;
    let survived_until = rep.t_exit.unwrap_or(cert.t_max);
    Ok((rep.outcome, survived_until))
}

/// Which boundary component a transversality sample sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundarySide {
    Lower,
    Upper,
}

/// How boundary tangency works for the system at hand: a first-order window
/// (the constrained coordinate has its own drift, as in the strip) or a
/// second-order one (position window with matched boundary velocity, as in
/// the pendulum and the rotating curve).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangencyKind {
    Velocity,
    Acceleration,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransversalitySample {
    pub t: f64,
    pub side: BoundarySide,
    pub state: Vec<f64>,
    /// Positive means the flow pushes outward (transverse or externally
    /// tangent); non-positive samples point inward and break the exit map.
    pub outward_margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub samples: Vec<TransversalitySample>,
    pub inward_count: usize,
    pub min_margin: f64,
}

const FD_STEP: f64 = 1e-4;

fn boundary_value(window: &Window, side: BoundarySide, t: f64) -> f64 {
    match side {
        BoundarySide::Lower => window.lower(t),
        BoundarySide::Upper => window.upper(t),
    }
}

fn boundary_dot(window: &Window, side: BoundarySide, t: f64) -> f64 {
    let h = FD_STEP;
    (boundary_value(window, side, t + h) - boundary_value(window, side, t - h)) / (2.0 * h)
}

fn boundary_ddot(window: &Window, side: BoundarySide, t: f64) -> f64 {
    let h = FD_STEP;
    (boundary_value(window, side, t + h) - 2.0 * boundary_value(window, side, t)
        + boundary_value(window, side, t - h))
        / (h * h)
}

/// Samples the boundary of `window` across `t_grid` and reports the signed
/// outward derivative of the constrained coordinate at each sample.
///
/// For `TangencyKind::Velocity` the companion coordinate is swept over
/// `companion_range` with `sample_count` points per boundary and time. For
/// `TangencyKind::Acceleration` the probe sits at the matched boundary
/// velocity and the margin compares accelerations.
pub fn verify_transversality(
    field: &VectorField,
    window: &Window,
    t_grid: &[f64],
    sample_count: usize,
    kind: TangencyKind,
    companion_range: (f64, f64),
) -> TransversalityReport {
    let mut samples = Vec::new();
    let coord = window.coord();
    let other = 1 - coord; // planar systems only
    for &t in t_grid {
        for side in [BoundarySide::Lower, BoundarySide::Upper] {
            let b = boundary_value(window, side, t);
            match kind {
                TangencyKind::Velocity => {
                    for k in 0..sample_count.max(1) {
                        let frac = if sample_count > 1 {
                            k as f64 / (sample_count - 1) as f64
                        } else {
                            0.5
                        };
                        let x = companion_range.0 + (companion_range.1 - companion_range.0) * frac;
                        let mut y = vec![0.0; 2];
                        y[coord] = b;
                        y[other] = x;
                        let dy = field.eval_vec(t, &y);
                        let rel = dy[coord] - boundary_dot(window, side, t);
                        let margin = match side {
                            BoundarySide::Upper => rel,
                            BoundarySide::Lower => -rel,
                        };
                        samples.push(TransversalitySample {
                            t,
                            side,
                            state: y,
                            outward_margin: margin,
                        });
                    }
                }
                TangencyKind::Acceleration => {
                    let mut y = vec![0.0; 2];
                    y[coord] = b;
                    y[other] = boundary_dot(window, side, t);
                    let dy = field.eval_vec(t, &y);
                    let rel = dy[other] - boundary_ddot(window, side, t);
                    let margin = match side {
                        BoundarySide::Upper => rel,
                        BoundarySide::Lower => -rel,
                    };
                    samples.push(TransversalitySample {
                        t,
                        side,
                        state: y,
                        outward_margin: margin,
                    });
                }
            }
        }
    }
    let inward_count = samples.iter().filter(|s| s.outward_margin <= 0.0).count();
    let min_margin = samples
        .iter()
        .map(|s| s.outward_margin)
        .fold(f64::INFINITY, f64::min);
    TransversalityReport {
        samples,
        inward_count,
        min_margin,
    }
}

/// Default shooting segment for the pendulum window x in (0, pi):
/// {(x, 0) : x in [0.2, pi - 0.2]} at t = 0.
pub fn pendulum_segment() -> Segment {
    Segment::new(
        State::new(0.0, vec![0.2, 0.0]),
        State::new(0.0, vec![std::f64::consts::PI - 0.2, 0.0]),
    )
    .expect("valid by construction")
}

/// Default shooting segment for the strip window |y| < 1:
/// {(0, y) : y in [-0.9, 0.9]} at t = 0.
pub fn strip_segment() -> Segment {
    Segment::new(
        State::new(0.0, vec![0.0, -0.9]),
        State::new(0.0, vec![0.0, 0.9]),
    )
    .expect("valid by construction")
}

/// Default shooting segment for the rotating curve: a path across the
/// window from (s1(0), s1'(0)) to (s2(0), s2'(0)), each endpoint moving
/// with its boundary so it exits immediately through that side.
pub fn curve_segment(s1: f64, s1_dot: f64, s2: f64, s2_dot: f64) -> Segment {
    Segment::new(
        State::new(0.0, vec![s1 + 0.05, s1_dot - 0.5]),
        State::new(0.0, vec![s2 - 0.05, s2_dot + 0.5]),
    )
    .expect("valid by construction")
}
