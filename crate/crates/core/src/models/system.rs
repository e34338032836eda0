//! The three model families as `VectorField` factories, plus the
//! finite-difference Euler-Lagrange oracle for the rotating curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::curve::{ConvexCurve, RotationLaw};
use crate::models::forcing::{Forcing, OscillatoryForcing};
use crate::models::mollifier::{Mollifier, PendulumGate};
use crate::ode::VectorField;

/// Pendulum with a horizontally moving pivot in (optionally oscillating)
/// gravity: x'' = f(t) sin x - (1 + sigma(x, x') g(lambda t)) cos x.
pub fn pendulum_field(
    f: &Forcing,
    g: Option<&OscillatoryForcing>,
    sigma: Option<&PendulumGate>,
) -> VectorField {
    let f = f.clone();
    let g = g.cloned();
    let sigma = sigma.cloned();
    let omega_max = g.as_ref().map(|g| g.omega_max()).unwrap_or(0.0);
    VectorField::new(2, omega_max, move |t, y, dy| {
        let gravity = match &g {
            None => 1.0,
            Some(g) => {
                let gate = sigma.as_ref().map(|s| s.eval(y[0], y[1])).unwrap_or(1.0);
                1.0 + gate * g.eval(t)
            }
        };
        // cos x computed as -sin(x - pi/2) so the upright equilibrium is an
        // exact floating-point fixed point (cos(PI/2 as f64) is ~6e-17, which
        // the saddle amplifies like e^t); the rewrite costs one ulp-level
        // phase shift everywhere else.
        let cos_x = -(y[0] - std::f64::consts::FRAC_PI_2).sin();
        dy[0] = y[1];
        dy[1] = f.eval(t) * y[0].sin() - gravity * cos_x;
    })
}

/// Planar strip velocity/drift functions selected from a small catalog so
/// scenarios stay serializable.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StripFun {
    Const { c: f64 },
    /// k * y
    LinearY { k: f64 },
    /// a * y + b * y^3
    CubicY { a: f64, b: f64 },
}

impl StripFun {
    pub fn eval(&self, _x: f64, y: f64) -> f64 {
        match self {
            StripFun::Const { c } => *c,
            StripFun::LinearY { k } => k * y,
            StripFun::CubicY { a, b } => a * y + b * y * y * y,
        }
    }
}

/// Planar strip system x' = v(x, y), y' = w(x, y) + u(lambda t).
#[derive(Clone, Debug)]
pub struct StripSystem {
    pub v: StripFun,
    pub w: StripFun,
    pub u: OscillatoryForcing,
    /// Margin a with w(x, 1) > a and w(x, -1) < -a.
    pub margin: f64,
    pub x_range: (f64, f64),
}

impl StripSystem {
    pub fn new(
        v: StripFun,
        w: StripFun,
        u: OscillatoryForcing,
        margin: f64,
        x_range: (f64, f64),
    ) -> Result<Self> {
        if !(margin >= 0.0) {
            return Err(Error::InvalidInput(format!("margin must be >= 0: {margin}")));
        }
        for k in 0..=1000 {
            let x = x_range.0 + (x_range.1 - x_range.0) * k as f64 / 1000.0;
            if !(w.eval(x, 1.0) > margin) || !(w.eval(x, -1.0) < -margin) {
                return Err(Error::InvalidInput(format!(
                    "boundary condition w(x, 1) > a, w(x, -1) < -a fails at x = {x}"
                )));
            }
        }
        Ok(Self {
            v,
            w,
            u,
            margin,
            x_range,
        })
    }
}

/// Strip field with the forcing optionally gated by a mollifier in y.
pub fn strip_field(sys: &StripSystem, sigma: Option<&Mollifier>) -> VectorField {
    let v = sys.v.clone();
    let w = sys.w.clone();
    let u = sys.u.clone();
    let sigma = sigma.cloned();
    let omega_max = u.omega_max();
    VectorField::new(2, omega_max, move |t, y, dy| {
        let gate = sigma.as_ref().map(|s| s.eval(y[1])).unwrap_or(1.0);
        dy[0] = v.eval(y[0], y[1]);
        dy[1] = w.eval(y[0], y[1]) + gate * u.eval(t);
    })
}

/// FD step for the boundary-velocity estimates s_i'(t).
const BOUNDARY_FD_STEP: f64 = 1e-5;

/// Time-dependent gate sigma(t, s, s') for the rotating curve: the product of
/// two plateau gates centered on the moving tangency states
/// (s_1(t), s_1'(t)) and (s_2(t), s_2'(t)).
#[derive(Clone)]
pub struct CurveGate {
    curve: ConvexCurve,
    law: RotationLaw,
    s_moll: Mollifier,
    v_moll: Mollifier,
}

impl CurveGate {
    pub fn new(curve: ConvexCurve, law: RotationLaw, delta: f64) -> Result<Self> {
        let h = delta / 2.0;
        Ok(Self {
            curve,
            law,
            s_moll: Mollifier::around(0.0, h, h)?,
            v_moll: Mollifier::around(0.0, h, h)?,
        })
    }

    fn tangency(&self, t: f64) -> Result<((f64, f64), (f64, f64))> {
        let h = BOUNDARY_FD_STEP;
        let (s1m, s2m) = self.curve.vertical_tangent_points(self.law.phi(t - h))?;
        let (s1, s2) = self.curve.vertical_tangent_points(self.law.phi(t))?;
        let (s1p, s2p) = self.curve.vertical_tangent_points(self.law.phi(t + h))?;
        Ok((
            (s1, (s1p - s1m) / (2.0 * h)),
            (s2, (s2p - s2m) / (2.0 * h)),
        ))
    }

    pub fn eval(&self, t: f64, s: f64, s_dot: f64) -> f64 {
        let Ok(((s1, v1), (s2, v2))) = self.tangency(t) else {
            return 1.0;
        };
        let len = self.curve.total_length();
        let wrap = |d: f64| {
            let mut v = d % len;
            if v >= len / 2.0 {
                v -= len;
            }
            if v < -len / 2.0 {
                v += len;
            }
            v
        };
        let gate1 =
            1.0 - (1.0 - self.s_moll.eval(wrap(s - s1))) * (1.0 - self.v_moll.eval(s_dot - v1));
        let gate2 =
            1.0 - (1.0 - self.s_moll.eval(wrap(s - s2))) * (1.0 - self.v_moll.eval(s_dot - v2));
        gate1 * gate2
    }
}

/// Rotating convex curve with a sliding point:
/// s'' = -phi''(xi eta' - eta xi') + phi'^2 (xi xi' + eta eta')
///       + (1 + sigma g(lambda t)) (xi' sin phi + eta' cos phi).
///
/// The gravity term carries a plus sign: it is the Euler-Lagrange equation
/// of L = T - V with V = -(xi sin phi + eta cos phi), which is the sign that
/// makes the vertical-tangency window an exit set (external tangencies on
/// both moving boundaries) with the saddle of V inside it.
pub fn rotating_curve_field(
    curve: &ConvexCurve,
    law: &RotationLaw,
    g: Option<&OscillatoryForcing>,
    sigma: Option<&CurveGate>,
) -> VectorField {
    let curve = curve.clone();
    let law = law.clone();
    let g = g.cloned();
    let sigma = sigma.cloned();
    let omega_max = g.as_ref().map(|g| g.omega_max()).unwrap_or(0.0);
    VectorField::new(2, omega_max, move |t, y, dy| {
        let (s, s_dot) = (y[0], y[1]);
        let p = curve.at(s);
        let phi = law.phi(t);
        let gravity = match &g {
            None => 1.0,
            Some(g) => {
                let gate = sigma.as_ref().map(|sg| sg.eval(t, s, s_dot)).unwrap_or(1.0);
                1.0 + gate * g.eval(t)
            }
        };
        dy[0] = s_dot;
        dy[1] = -law.phi_ddot(t) * (p.xi * p.eta_p - p.eta * p.xi_p)
            + law.phi_dot(t).powi(2) * (p.xi * p.xi_p + p.eta * p.eta_p)
            + gravity * (p.xi_p * phi.sin() + p.eta_p * phi.cos());
    })
}

/// Samples the moving tangency boundaries s_1(t), s_2(t) on a uniform grid
/// over `[t0, t1]` and packages them as a window with cubic Hermite
/// interpolation between nodes; exit detection evaluates the boundaries
/// thousands of times per unit time, and the tabulation replaces a Newton
/// solve per evaluation. `n` nodes per unit time (>= 100 recommended) keep
/// the interpolation error orders below the mollifier collar width.
pub fn curve_window(
    curve: &ConvexCurve,
    law: &RotationLaw,
    t0: f64,
    t1: f64,
    nodes_per_unit: usize,
) -> Result<crate::ode::Window> {
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!("bad window span [{t0}, {t1}]")));
    }
    let n = ((t1 - t0) * nodes_per_unit as f64).ceil() as usize + 1;
    let dt = (t1 - t0) / n as f64;
    let mut s1 = Vec::with_capacity(n + 1);
    let mut s2 = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = t0 + dt * k as f64;
        let (a, b) = curve.vertical_tangent_points(law.phi(t))?;
        s1.push(a);
        s2.push(b);
    }
    let hermite = move |vals: Vec<f64>, t0: f64, dt: f64| {
        move |t: f64| -> f64 {
            let u = ((t - t0) / dt).clamp(0.0, (vals.len() - 1) as f64);
            let k = (u.floor() as usize).min(vals.len() - 2);
            let x = u - k as f64;
            // Nodal slopes from central differences (one-sided at the ends).
            let slope = |j: usize| -> f64 {
                if j == 0 {
                    vals[1] - vals[0]
                } else if j == vals.len() - 1 {
                    vals[j] - vals[j - 1]
                } else {
                    0.5 * (vals[j + 1] - vals[j - 1])
                }
            };
            let (p0, p1, m0, m1) = (vals[k], vals[k + 1], slope(k), slope(k + 1));
            let x2 = x * x;
            let x3 = x2 * x;
            p0 * (2.0 * x3 - 3.0 * x2 + 1.0)
                + m0 * (x3 - 2.0 * x2 + x)
                + p1 * (-2.0 * x3 + 3.0 * x2)
                + m1 * (x3 - x2)
        }
    };
    Ok(crate::ode::Window::new(
        0,
        hermite(s1, t0, dt),
        hermite(s2, t0, dt),
    ))
}

/// Lagrangian of the rotating-curve system, L = T - V.
fn lagrangian(curve: &ConvexCurve, law: &RotationLaw, t: f64, s: f64, s_dot: f64) -> f64 {
    let p = curve.at(s);
    let phi = law.phi(t);
    let phi_dot = law.phi_dot(t);
    let kinetic = 0.5
        * (s_dot * s_dot
            + phi_dot * phi_dot * (p.xi * p.xi + p.eta * p.eta)
            + 2.0 * phi_dot * s_dot * (p.xi * p.eta_p - p.eta * p.xi_p));
    // Height above the rotation center is -(xi sin phi + eta cos phi): the
    // window between the vertical tangencies must contain the maximum of V
    // (the precarious point) for the boundary to be an exit set.
    let potential = -(p.xi * phi.sin() + p.eta * phi.cos());
    kinetic - potential
}

/// Central difference with one Richardson extrapolation step.
fn richardson_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Residual of d/dt(dL/ds') - dL/ds against the implemented dynamics, with
/// every partial of L taken by finite differences. Independent of the
/// algebraic form of the equation of motion.
pub fn lagrangian_residual(
    curve: &ConvexCurve,
    law: &RotationLaw,
    s: f64,
    s_dot: f64,
    t: f64,
) -> f64 {
    // The outer step is larger than the inner one so the inner FD noise
    // (~eps/h_in) is not amplified past the outer truncation error.
    let h_in = 1e-4;
    let h_out = 1e-3;
    let dl_dsdot = |t: f64, s: f64, sd: f64| {
        richardson_diff(|v| lagrangian(curve, law, t, s, v), sd, h_in)
    };
    // Total time derivative of dL/ds' along the flow, with s'' taken from the
    // implemented field.
    let field = rotating_curve_field(curve, law, None, None);
    let s_ddot = field.eval_vec(t, &[s, s_dot])[1];
    let d_dt = richardson_diff(|tt| dl_dsdot(tt, s, s_dot), t, h_out);
    let d_ds = richardson_diff(|ss| dl_dsdot(t, ss, s_dot), s, h_out);
    let d_dsdot2 = richardson_diff(|v| dl_dsdot(t, s, v), s_dot, h_out);
    let dl_ds = richardson_diff(|ss| lagrangian(curve, law, t, ss, s_dot), s, h_in);
    d_dt + d_ds * s_dot + d_dsdot2 * s_ddot - dl_ds
}

/// A model bundled with its forcings, as consumed by the averaging module:
/// it can produce both the lambda-forced field and the field with the
/// oscillatory forcing replaced by a constant mean.
#[derive(Clone)]
pub enum ForcedSystem {
    Pendulum {
        f: Forcing,
        g: Option<OscillatoryForcing>,
        sigma: Option<PendulumGate>,
    },
    Strip {
        sys: StripSystem,
        sigma: Option<Mollifier>,
    },
    RotatingCurve {
        curve: ConvexCurve,
        law: RotationLaw,
        g: Option<OscillatoryForcing>,
        sigma: Option<CurveGate>,
    },
}

impl ForcedSystem {
    pub fn field(&self) -> VectorField {
        match self {
            ForcedSystem::Pendulum { f, g, sigma } => {
                pendulum_field(f, g.as_ref(), sigma.as_ref())
            }
            ForcedSystem::Strip { sys, sigma } => strip_field(sys, sigma.as_ref()),
            ForcedSystem::RotatingCurve {
                curve,
                law,
                g,
                sigma,
            } => rotating_curve_field(curve, law, g.as_ref(), sigma.as_ref()),
        }
    }

    pub fn oscillatory(&self) -> Option<&OscillatoryForcing> {
        match self {
            ForcedSystem::Pendulum { g, .. } => g.as_ref(),
            ForcedSystem::Strip { sys, .. } => Some(&sys.u),
            ForcedSystem::RotatingCurve { g, .. } => g.as_ref(),
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        self.oscillatory().map(|g| g.lambda)
    }

    /// The field with g(lambda t) replaced by the constant `mean`; any gate
    /// becomes irrelevant because the replacement is autonomous.
    pub fn field_with_mean(&self, mean: f64) -> VectorField {
        match self {
            ForcedSystem::Pendulum { f, g, .. } => {
                let f = f.clone();
                let gravity = if g.is_some() { 1.0 + mean } else { 1.0 };
                VectorField::new(2, 0.0, move |t, y, dy| {
                    // same exact-equilibrium rewrite as pendulum_field
                    let cos_x = -(y[0] - std::f64::consts::FRAC_PI_2).sin();
                    dy[0] = y[1];
                    dy[1] = f.eval(t) * y[0].sin() - gravity * cos_x;
                })
            }
            ForcedSystem::Strip { sys, .. } => {
                let v = sys.v.clone();
                let w = sys.w.clone();
                VectorField::new(2, 0.0, move |_t, y, dy| {
                    dy[0] = v.eval(y[0], y[1]);
                    dy[1] = w.eval(y[0], y[1]) + mean;
                })
            }
            ForcedSystem::RotatingCurve { curve, law, g, .. } => {
                let curve = curve.clone();
                let law = law.clone();
                let gravity = if g.is_some() { 1.0 + mean } else { 1.0 };
                VectorField::new(2, 0.0, move |t, y, dy| {
                    let p = curve.at(y[0]);
                    let phi = law.phi(t);
                    dy[0] = y[1];
                    dy[1] = -law.phi_ddot(t) * (p.xi * p.eta_p - p.eta * p.xi_p)
                        + law.phi_dot(t).powi(2) * (p.xi * p.xi_p + p.eta * p.eta_p)
                        + gravity * (p.xi_p * phi.sin() + p.eta_p * phi.cos());
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::forcing::ForcingExpr;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn sin_forcing(lambda: f64) -> OscillatoryForcing {
        OscillatoryForcing::new(ForcingExpr::sin(1.0, 1.0, 0.0), lambda).unwrap()
    }

    #[test]
    fn pendulum_equilibrium_acceleration_vanishes() {
        let field = pendulum_field(&Forcing::zero(), None, None);
        let dy = field.eval_vec(0.0, &[FRAC_PI_2, 0.0]);
        // cos(pi/2) is ~6e-17 in floating point, not exactly zero.
        assert!(dy[1].abs() < 1e-15);
    }

    #[test]
    fn pendulum_local_model_near_zero() {
        // At (x, x', t) = (0, 0, 0) with g = sin: acceleration -(1 + sin 0) = -1.
        let field = pendulum_field(&Forcing::zero(), Some(&sin_forcing(10.0)), None);
        let dy = field.eval_vec(0.0, &[0.0, 0.0]);
        assert!((dy[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pendulum_gate_kills_forcing_on_plateau() {
        let f = Forcing::new(ForcingExpr::cos(1.0, 1.0, 0.0)).unwrap();
        let gate = PendulumGate::standard(0.05).unwrap();
        let field = pendulum_field(&f, Some(&sin_forcing(10.0)), Some(&gate));
        for t in [0.0, 0.3, 1.7] {
            let dy = field.eval_vec(t, &[0.0, 0.0]);
            assert!((dy[1] + 1.0).abs() < 1e-15, "t = {t}: {}", dy[1]);
        }
    }

    #[test]
    fn strip_field_direct_evaluation() {
        let sys = StripSystem::new(
            StripFun::Const { c: 1.0 },
            StripFun::LinearY { k: 1.0 },
            sin_forcing(5.0),
            0.5,
            (-10.0, 10.0),
        )
        .unwrap();
        // u = 0 route: evaluate where sin(5t) = 0.
        let field = strip_field(&sys, None);
        let dy = field.eval_vec(0.0, &[0.0, 1.0]);
        assert!((dy[0] - 1.0).abs() < 1e-15 && (dy[1] - 1.0).abs() < 1e-15);
        // sin(lambda t) = sin(pi/2) = 1 at t = pi/10 with lambda = 5.
        let dy = field.eval_vec(PI / 10.0, &[0.0, 0.0]);
        assert!((dy[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strip_gate_pins_boundary_value() {
        let sys = StripSystem::new(
            StripFun::Const { c: 1.0 },
            StripFun::LinearY { k: 2.0 },
            sin_forcing(5.0),
            1.0,
            (-10.0, 10.0),
        )
        .unwrap();
        let sigma = Mollifier::new(vec![(0.975, 1.025), (-1.025, -0.975)], 0.025).unwrap();
        let field = strip_field(&sys, Some(&sigma));
        for t in [0.1, 0.7, 2.9] {
            let dy = field.eval_vec(t, &[3.0, 1.0]);
            assert!((dy[1] - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn circle_reduction_of_rotating_field() {
        // For the circle of radius R (xi = R cos(s/R), eta = R sin(s/R)) the
        // dynamics reduce to s'' = -phi'' R + cos(s/R + phi).
        let r = 1.7;
        let curve = ConvexCurve::circle(r).unwrap();
        let law = RotationLaw::new(ForcingExpr::sin(0.3, 1.0, 0.0), 0.4).unwrap();
        let field = rotating_curve_field(&curve, &law, None, None);
        for (t, s, sd) in [(0.0, 3.0, 0.5), (1.3, -2.0, 0.0), (2.7, 11.0, -1.0)] {
            let dy = field.eval_vec(t, &[s, sd]);
            let expect = -law.phi_ddot(t) * r + (s / r + law.phi(t)).cos();
            assert!((dy[1] - expect).abs() < 1e-12, "{} vs {}", dy[1], expect);
        }
    }

    #[test]
    fn bottom_of_circle_is_equilibrium() {
        let curve = ConvexCurve::circle(1.0).unwrap();
        let law = RotationLaw::new(ForcingExpr::Zero, 0.1).unwrap();
        let field = rotating_curve_field(&curve, &law, None, None);
        let dy = field.eval_vec(0.0, &[3.0 * FRAC_PI_2, 0.0]);
        assert!(dy[1].abs() < 1e-12);
    }

    #[test]
    fn rotating_field_at_phi_from_sine_law() {
        let curve = ConvexCurve::circle(1.0).unwrap();
        let law = RotationLaw::new(ForcingExpr::sin(0.3, 1.0, 0.0), 0.4).unwrap();
        let field = rotating_curve_field(&curve, &law, None, None);
        // phi(0) = 0, phi''(0) = 0: s'' = cos(pi) = -1 at s = pi, i.e. the
        // lower tangency pushes out through the lower boundary.
        let dy = field.eval_vec(0.0, &[PI, 0.0]);
        assert!((dy[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn curve_gate_zeroes_forcing_at_tangency_state() {
        let curve = ConvexCurve::circle(1.0).unwrap();
        let law = RotationLaw::new(ForcingExpr::sin(0.3, 1.0, 0.0), 0.4).unwrap();
        let gate = CurveGate::new(curve.clone(), law.clone(), 0.05).unwrap();
        let g = sin_forcing(50.0);
        let gated = rotating_curve_field(&curve, &law, Some(&g), Some(&gate));
        let bare = rotating_curve_field(&curve, &law, None, None);
        let ((s1, v1), _) = gate.tangency(0.31).unwrap();
        let a = gated.eval_vec(0.31, &[s1, v1]);
        let b = bare.eval_vec(0.31, &[s1, v1]);
        assert_eq!(a[1], b[1]);
        // Far from both tangency states the gate is exactly one.
        assert_eq!(gate.eval(0.31, s1 + 1.0, v1 + 1.0), 1.0);
    }

    #[test]
    fn lagrangian_residual_circle() {
        let curve = ConvexCurve::circle(1.0).unwrap();
        let law = RotationLaw::new(ForcingExpr::Zero, 0.1).unwrap();
        for (s, sd) in [(0.3, 0.0), (2.0, 1.5), (-1.0, -0.4)] {
            let r = lagrangian_residual(&curve, &law, s, sd, 0.5);
            assert!(r.abs() < 1e-6, "residual {r:e} at ({s}, {sd})");
        }
    }

    #[test]
    fn lagrangian_residual_ellipse_rotating() {
        let curve = ConvexCurve::ellipse(2.0, 1.0).unwrap();
        let law = RotationLaw::new(ForcingExpr::sin(0.2, 1.0, 0.0), 0.3).unwrap();
        let r = lagrangian_residual(&curve, &law, 1.0, 0.5, 0.3);
        assert!(r.abs() < 1e-5, "residual {r:e}");
    }

    #[test]
    fn vertical_tangent_point_acceleration() {
        // At s2 with phi constant and s' = 0 the equation gives
        // s'' = +(xi' sin phi + eta' cos phi) = +1: external tangency at the
        // upper boundary.
        let curve = ConvexCurve::ellipse(2.0, 1.0).unwrap();
        let law = RotationLaw::new(ForcingExpr::Zero, 0.1).unwrap();
        let (_s1, s2) = curve.vertical_tangent_points(0.0).unwrap();
        let field = rotating_curve_field(&curve, &law, None, None);
        let dy = field.eval_vec(0.0, &[s2, 0.0]);
        assert!((dy[1] - 1.0).abs() < 1e-9);
        let r = lagrangian_residual(&curve, &law, s2, 0.0, 0.0);
        assert!(r.abs() < 1e-6);
    }
}
