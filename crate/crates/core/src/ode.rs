//! Adaptive Dormand-Prince 5(4) integration with dense output and
//! boundary-exit event localization.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A time-stamped phase point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub y: Vec<f64>,
}

impl State {
    pub fn new(t: f64, y: Vec<f64>) -> Self {
        Self { t, y }
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.y.iter().all(|v| v.is_finite())
    }
}

type FieldFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Right-hand side of a non-autonomous ODE, with an optional hint about the
/// fastest forcing frequency so the step size can resolve the oscillation.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    omega_max: f64,
    eval: Arc<FieldFn>,
}

impl VectorField {
    pub fn new(
        dim: usize,
        omega_max: f64,
        eval: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            omega_max,
            eval: Arc::new(eval),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Maximum forcing angular frequency (rad/s); zero means "no hint".
    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    pub fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.eval)(t, y, dy);
    }

    pub fn eval_vec(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut dy = vec![0.0; self.dim];
        self.eval(t, y, &mut dy);
        dy
    }
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("omega_max", &self.omega_max)
            .finish()
    }
}

/// One accepted step together with its dense-output coefficients.
#[derive(Clone, Debug)]
struct StepRecord {
    t0: f64,
    h: f64,
    // Hairer's continuous extension: y(t0 + theta*h) =
    // r[0] + theta*(r[1] + (1-theta)*(r[2] + theta*(r[3] + (1-theta)*r[4])))
    rcont: [Vec<f64>; 5],
}

impl StepRecord {
    fn interpolate(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t0) / self.h;
        let th1 = 1.0 - theta;
        for i in 0..out.len() {
            out[i] = self.rcont[0][i]
                + theta
                    * (self.rcont[1][i]
                        + th1 * (self.rcont[2][i] + theta * (self.rcont[3][i] + th1 * self.rcont[4][i])));
        }
    }
}

/// Dense-output solution curve over a time span.
#[derive(Clone, Debug)]
pub struct Trajectory {
    dim: usize,
    steps: Vec<StepRecord>,
    t_start: f64,
    t_end: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Accepted step nodes (t, y), including the initial point.
    pub fn nodes(&self) -> Vec<State> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        if let Some(first) = self.steps.first() {
            out.push(State::new(first.t0, first.rcont[0].clone()));
        }
        for s in &self.steps {
            let mut y = vec![0.0; self.dim];
            s.interpolate(s.t0 + s.h, &mut y);
            out.push(State::new(s.t0 + s.h, y));
        }
        out
    }

    fn step_index(&self, t: f64) -> usize {
        // Last step whose start is <= t.
        let mut lo = 0usize;
        let mut hi = self.steps.len();
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.steps[mid].t0 <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Dense-output interpolation at time `t`.
    pub fn sample(&self, t: f64) -> Result<State> {
        let slack = 1e-12 * (1.0 + self.t_end.abs().max(self.t_start.abs()));
        if t < self.t_start - slack || t > self.t_end + slack {
            return Err(Error::OutOfSpan {
                t,
                lo: self.t_start,
                hi: self.t_end,
            });
        }
        let t = t.clamp(self.t_start, self.t_end);
        let rec = &self.steps[self.step_index(t)];
        let mut y = vec![0.0; self.dim];
        rec.interpolate(t, &mut y);
        Ok(State::new(t, y))
    }

    pub fn end_state(&self) -> State {
        self.sample(self.t_end).expect("end of span is in span")
    }
}

/// Time-dependent window on one phase component.
#[derive(Clone)]
pub struct Window {
    coord: usize,
    lower: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    upper: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Window {
    pub fn new(
        coord: usize,
        lower: impl Fn(f64) -> f64 + Send + Sync + 'static,
        upper: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            coord,
            lower: Arc::new(lower),
            upper: Arc::new(upper),
        }
    }

    pub fn constant(coord: usize, lo: f64, hi: f64) -> Self {
        Self::new(coord, move |_| lo, move |_| hi)
    }

    pub fn coord(&self) -> usize {
        self.coord
    }

    pub fn lower(&self, t: f64) -> f64 {
        (self.lower)(t)
    }

    pub fn upper(&self, t: f64) -> f64 {
        (self.upper)(t)
    }

    pub fn contains(&self, t: f64, y: &[f64]) -> bool {
        let v = y[self.coord];
        v > self.lower(t) && v < self.upper(t)
    }
}

impl std::fmt::Debug for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Window").field("coord", &self.coord).finish()
    }
}

/// Which boundary component a solution left through, if any.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitOutcome {
    ExitLow,
    ExitHigh,
    Survived,
}

#[derive(Clone, Debug)]
pub struct ExitReport {
    pub outcome: ExitOutcome,
    pub t_exit: Option<f64>,
    pub state_exit: Option<State>,
    pub trajectory: Trajectory,
    /// Dense samples that touched the boundary within 1e-12 without crossing.
    pub near_grazes: usize,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights coincide with the last row of A (FSAL).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2; // max step decrease factor
const FAC_MAX: f64 = 10.0; // max step increase factor

fn error_norm(err: &[f64], y: &[f64], tol: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..err.len() {
        let sc = tol * (y[i].abs() + 1.0);
        worst = worst.max(err[i].abs() / sc);
    }
    worst
}

fn initial_step(field: &VectorField, t0: f64, y0: &[f64], f0: &[f64], t1: f64, tol: f64) -> f64 {
    let span = t1 - t0;
    let sc: Vec<f64> = y0.iter().map(|v| tol * (v.abs() + 1.0)).collect();
    let d0 = y0
        .iter()
        .zip(&sc)
        .map(|(v, s)| (v / s).powi(2))
        .sum::<f64>()
        .sqrt();
    let d1 = f0
        .iter()
        .zip(&sc)
        .map(|(v, s)| (v / s).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span);
    // One explicit Euler step to probe the second derivative.
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let f1 = field.eval_vec(t0 + h0, &y1);
    let d2 = f1
        .iter()
        .zip(f0)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        .sqrt()
        / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

struct Integrator<'a> {
    field: &'a VectorField,
    tol: f64,
    t1: f64,
    h_cap: f64,
    t: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    facold: f64,
    steps: Vec<StepRecord>,
}

enum StepResult {
    Accepted,
    Done,
}

impl<'a> Integrator<'a> {
    fn new(field: &'a VectorField, y0: &State, t1: f64, tol: f64) -> Result<Self> {
        if !(tol >= 1e-13 && tol <= 1e-3) {
            return Err(Error::InvalidInput(format!(
                "tol {tol:e} outside [1e-13, 1e-3]"
            )));
        }
        if !(t1 > y0.t) {
            return Err(Error::InvalidInput(format!(
                "t1 = {t1} must exceed t0 = {}",
                y0.t
            )));
        }
        if y0.dim() != field.dim() {
            return Err(Error::InvalidInput(format!(
                "state dimension {} does not match field dimension {}",
                y0.dim(),
                field.dim()
            )));
        }
        if !y0.is_finite() {
            return Err(Error::NonFinite { t: y0.t });
        }
        let h_cap = if field.omega_max() > 0.0 {
            2.0 * std::f64::consts::PI / (20.0 * field.omega_max())
        } else {
            f64::INFINITY
        };
        let k1 = field.eval_vec(y0.t, &y0.y);
        if !k1.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: y0.t });
        }
        let h = initial_step(field, y0.t, &y0.y, &k1, t1, tol).min(h_cap);
        Ok(Self {
            field,
            tol,
            t1,
            h_cap,
            t: y0.t,
            y: y0.y.clone(),
            k1,
            h,
            facold: 1e-4,
            steps: Vec::new(),
        })
    }

    /// Advances by one accepted step (possibly after rejections).
    fn step(&mut self) -> Result<StepResult> {
        if self.t >= self.t1 {
            return Ok(StepResult::Done);
        }
        let n = self.field.dim();
        let mut k = vec![vec![0.0; n]; 7];
        k[0].copy_from_slice(&self.k1);
        let mut ytmp = vec![0.0; n];
        loop {
            let mut h = self.h.min(self.h_cap);
            let last = self.t + h >= self.t1 - 1e-14 * (1.0 + self.t1.abs());
            if last {
                h = self.t1 - self.t;
            }
            if h < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t: self.t });
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    ytmp[i] = self.y[i] + h * acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                self.field.eval(self.t + C[s] * h, &ytmp, &mut tail[0]);
            }
            // k[6] was evaluated at the 5th-order solution ytmp (FSAL).
            let y_new = ytmp.clone();
            if !y_new.iter().all(|v| v.is_finite()) || !k[6].iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { t: self.t + h });
            }
            let mut err = vec![0.0; n];
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc += E[j] * kj[i];
                }
                err[i] = h * acc;
            }
            let errn = error_norm(&err, &y_new, self.tol).max(error_norm(&err, &self.y, self.tol));
            let fac11 = errn.powf(EXPO1);
            if errn <= 1.0 {
                // Accept: build dense output.
                let facold = errn.max(1e-4);
                let mut fac = fac11 / self.facold.powf(BETA);
                fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let h_next = h / fac;
                self.facold = facold;

                let ydiff: Vec<f64> = y_new.iter().zip(&self.y).map(|(a, b)| a - b).collect();
                let bspl: Vec<f64> = k[0]
                    .iter()
                    .zip(&ydiff)
                    .map(|(k1, d)| h * k1 - d)
                    .collect();
                let r4: Vec<f64> = ydiff
                    .iter()
                    .zip(&k[6])
                    .zip(&bspl)
                    .map(|((d, k7), b)| d - h * k7 - b)
                    .collect();
                let mut r5 = vec![0.0; n];
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate() {
                        acc += D[j] * kj[i];
                    }
                    r5[i] = h * acc;
                }
                self.steps.push(StepRecord {
                    t0: self.t,
                    h,
                    rcont: [self.y.clone(), ydiff, bspl, r4, r5],
                });
                self.t += h;
                self.y = y_new;
                self.k1.copy_from_slice(&k[6]);
                self.h = h_next;
                return Ok(StepResult::Accepted);
            }
            // Reject and retry with a smaller step.
            self.h = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }

    fn finish(self) -> Trajectory {
        let t_start = self.steps.first().map(|s| s.t0).unwrap_or(self.t);
        Trajectory {
            dim: self.field.dim(),
            steps: self.steps,
            t_start,
            t_end: self.t,
        }
    }
}

/// Integrates `field` from `y0` to `t1` with relative tolerance `tol`.
pub fn integrate(field: &VectorField, y0: &State, t1: f64, tol: f64) -> Result<Trajectory> {
    let mut integ = Integrator::new(field, y0, t1, tol)?;
    loop {
        match integ.step()? {
            StepResult::Accepted => {}
            StepResult::Done => return Ok(integ.finish()),
        }
    }
}

/// Dense samples per accepted step used to detect boundary crossings.
pub const EXIT_SAMPLES_PER_STEP: usize = 64;
const GRAZE_EPS: f64 = 1e-12;

/// Signed distances to the window boundaries; both positive strictly inside.
fn gaps(window: &Window, t: f64, y: &[f64]) -> (f64, f64) {
    let v = y[window.coord()];
    (v - window.lower(t), window.upper(t) - v)
}

/// Integrates until the constrained coordinate first leaves `window`, or
/// until `t_max` if it never does.
pub fn integrate_with_exit(
    field: &VectorField,
    y0: &State,
    t_max: f64,
    window: &Window,
    tol: f64,
) -> Result<ExitReport> {
    {
        let (gl, gu) = gaps(window, y0.t, &y0.y);
        if gl <= 0.0 || gu <= 0.0 {
            return Err(Error::InvalidInput(
                "initial state is not strictly inside the window".into(),
            ));
        }
    }
    let mut integ = Integrator::new(field, y0, t_max, tol)?;
    let mut near_grazes = 0usize;
    let mut buf = vec![0.0; field.dim()];
    loop {
        match integ.step()? {
            StepResult::Done => break,
            StepResult::Accepted => {}
        }
        let rec = integ.steps.last().expect("just accepted a step");
        let (t0, h) = (rec.t0, rec.h);
        let mut t_prev = t0;
        let mut g_prev = {
            rec.interpolate(t_prev, &mut buf);
            gaps(window, t_prev, &buf)
        };
        for j in 1..=EXIT_SAMPLES_PER_STEP {
            let t = t0 + h * (j as f64) / (EXIT_SAMPLES_PER_STEP as f64);
            rec.interpolate(t, &mut buf);
            let g = gaps(window, t, &buf);
            for side in 0..2 {
                let (gp, gc) = if side == 0 { (g_prev.0, g.0) } else { (g_prev.1, g.1) };
                if gc < -GRAZE_EPS || (gc < 0.0 && gp > 0.0) {
                    // Crossing inside (t_prev, t]: localize by bisection on the
                    // dense output of this step.
                    let eval_gap = |tt: f64, b: &mut Vec<f64>| {
                        rec.interpolate(tt, b);
                        let g = gaps(window, tt, b);
                        if side == 0 {
                            g.0
                        } else {
                            g.1
                        }
                    };
                    let mut lo = t_prev;
                    let mut hi = t;
                    let tol_t = 1e-12 * hi.abs().max(1.0);
                    for _ in 0..50 {
                        if hi - lo <= tol_t {
                            break;
                        }
                        let mid = 0.5 * (lo + hi);
                        if eval_gap(mid, &mut buf) > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let t_exit = 0.5 * (lo + hi);
                    rec.interpolate(t_exit, &mut buf);
                    let state_exit = State::new(t_exit, buf.clone());
                    let outcome = if side == 0 {
                        ExitOutcome::ExitLow
                    } else {
                        ExitOutcome::ExitHigh
                    };
                    // Truncate history at this step; the report keeps the
                    // whole accepted-step trajectory up to the crossing step.
                    let traj = integ.finish();
                    return Ok(ExitReport {
                        outcome,
                        t_exit: Some(t_exit),
                        state_exit: Some(state_exit),
                        trajectory: traj,
                        near_grazes,
                    });
                }
                if gc.abs() <= GRAZE_EPS {
                    // Touching within tolerance without a sign change is not
                    // an exit; the windows are open.
                    near_grazes += 1;
                }
            }
            t_prev = t;
            g_prev = g;
        }
    }
    Ok(ExitReport {
        outcome: ExitOutcome::Survived,
        t_exit: None,
        state_exit: None,
        trajectory: integ.finish(),
        near_grazes,
    })
}
