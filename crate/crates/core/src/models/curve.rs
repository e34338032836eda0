//! Arclength-parametrized closed convex curves: analytic circles, and
//! quadrature-reparametrized parametric curves (ellipses and friends).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::models::forcing::ForcingExpr;

/// Curve data at one arclength value: position, unit tangent, and the
/// tangent's arclength derivative.
#[derive(Clone, Copy, Debug)]
pub struct CurvePoint {
    pub xi: f64,
    pub eta: f64,
    pub xi_p: f64,
    pub eta_p: f64,
    pub xi_pp: f64,
    pub eta_pp: f64,
}

impl CurvePoint {
    /// Signed curvature xi' eta'' - eta' xi''.
    pub fn curvature(&self) -> f64 {
        self.xi_p * self.eta_pp - self.eta_p * self.xi_pp
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

struct Reparam {
    s_nodes: Vec<f64>,
    theta_step: f64,
    x: ScalarFn,
    y: ScalarFn,
    dx: ScalarFn,
    dy: ScalarFn,
    d2x: ScalarFn,
    d2y: ScalarFn,
}

impl Reparam {
    fn speed(&self, theta: f64) -> f64 {
        let dx = (self.dx)(theta);
        let dy = (self.dy)(theta);
        dx.hypot(dy)
    }

    /// Monotone inverse of the cumulative arclength: cubic Hermite on each
    /// panel with exact nodal derivatives d(theta)/ds = 1/speed.
    fn theta_of_s(&self, s: f64) -> f64 {
        let n = self.s_nodes.len() - 1;
        let mut lo = 0usize;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.s_nodes[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (s0, s1) = (self.s_nodes[lo], self.s_nodes[lo + 1]);
        let h = s1 - s0;
        let u = ((s - s0) / h).clamp(0.0, 1.0);
        let th0 = lo as f64 * self.theta_step;
        let th1 = th0 + self.theta_step;
        let m0 = h / self.speed(th0);
        let m1 = h / self.speed(th1);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * th0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * th1
            + (u3 - u2) * m1
    }

    fn eval(&self, s: f64) -> CurvePoint {
        let theta = self.theta_of_s(s);
        let (x, y) = ((self.x)(theta), (self.y)(theta));
        let (dx, dy) = ((self.dx)(theta), (self.dy)(theta));
        let (d2x, d2y) = ((self.d2x)(theta), (self.d2y)(theta));
        let v = dx.hypot(dy);
        let v2 = v * v;
        // dv/dtheta projected out so the tangent stays exactly unit-length.
        let vp_over_v2 = (dx * d2x + dy * d2y) / v2;
        CurvePoint {
            xi: x,
            eta: y,
            xi_p: dx / v,
            eta_p: dy / v,
            xi_pp: (d2x - dx * vp_over_v2) / v2,
            eta_pp: (d2y - dy * vp_over_v2) / v2,
        }
    }
}

enum Geometry {
    Circle { r: f64, cx: f64, cy: f64 },
    Parametric(Reparam),
}

struct CurveInner {
    total_length: f64,
    geometry: Geometry,
    /// Monotone lift of the tangent angle at grid arclengths; last entry is
    /// (L, psi(0) + 2*pi).
    psi_grid: Vec<(f64, f64)>,
}

/// Smooth strictly convex closed curve under natural parametrization.
#[derive(Clone)]
pub struct ConvexCurve {
    inner: Arc<CurveInner>,
}

impl std::fmt::Debug for ConvexCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvexCurve")
            .field("total_length", &self.inner.total_length)
            .finish()
    }
}

const PSI_GRID_N: usize = 4096;
const REPARAM_NODES: usize = 4096;

fn angle_diff(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    // Rotation from direction a to direction b, in (-pi, pi].
    (ax * by - ay * bx).atan2(ax * bx + ay * by)
}

impl ConvexCurve {
    fn from_geometry(total_length: f64, geometry: Geometry) -> Result<Self> {
        let mut inner = CurveInner {
            total_length,
            geometry,
            psi_grid: Vec::new(),
        };
        // Build the tangent-angle lift and validate strict convexity.
        let p0 = inner.eval(0.0);
        let mut psi = p0.eta_p.atan2(p0.xi_p);
        let mut grid = Vec::with_capacity(PSI_GRID_N + 1);
        grid.push((0.0, psi));
        let mut prev = p0;
        let mut kappa_min = f64::INFINITY;
        let mut kappa_max: f64 = 0.0;
        for j in 1..=PSI_GRID_N {
            let s = total_length * j as f64 / PSI_GRID_N as f64;
            let p = inner.eval(s);
            let d = angle_diff(prev.xi_p, prev.eta_p, p.xi_p, p.eta_p);
            if d <= 0.0 {
                return Err(Error::InvalidInput(
                    "tangent angle is not strictly increasing: curve is not strictly convex".into(),
                ));
            }
            psi += d;
            grid.push((s, psi));
            let k = p.curvature();
            kappa_min = kappa_min.min(k);
            kappa_max = kappa_max.max(k);
            prev = p;
        }
        if kappa_min <= 0.0 || !kappa_max.is_finite() {
            return Err(Error::InvalidInput(
                "curvature must be positive and bounded on the whole curve".into(),
            ));
        }
        let turn = grid.last().unwrap().1 - grid[0].1;
        if (turn - 2.0 * std::f64::consts::PI).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "total tangent turn {turn} differs from 2*pi: curve is not a simple convex loop"
            )));
        }
        inner.psi_grid = grid;
        Ok(Self {
            inner: Arc::new(inner),
        })
    }

    /// Circle of radius `r` centered at the origin.
    pub fn circle(r: f64) -> Result<Self> {
        Self::circle_at(r, 0.0, 0.0)
    }

    pub fn circle_at(r: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidInput(format!("radius must be positive: {r}")));
        }
        Self::from_geometry(2.0 * std::f64::consts::PI * r, Geometry::Circle { r, cx, cy })
    }

    /// Axis-aligned ellipse with semi-axes `a`, `b`, numerically
    /// reparametrized by arclength.
    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidInput(format!(
                "semi-axes must be positive: a={a}, b={b}"
            )));
        }
        Self::from_parametric(
            move |th| a * th.cos(),
            move |th| b * th.sin(),
            move |th| -a * th.sin(),
            move |th| b * th.cos(),
            move |th| -a * th.cos(),
            move |th| -b * th.sin(),
        )
    }

    /// Arclength reparametrization of a 2*pi-periodic parametric curve:
    /// cumulative length by panel-wise Gauss quadrature, inverse by monotone
    /// Hermite interpolation.
    pub fn from_parametric(
        x: impl Fn(f64) -> f64 + Send + Sync + 'static,
        y: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dx: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dy: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2x: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2y: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        // 5-point Gauss-Legendre nodes on [-1, 1].
        const GX: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        const GW: [f64; 5] = [
            0.236_926_885_056_189,
            0.478_628_670_499_366,
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
        ];
        let speed = |th: f64| (dx(th)).hypot(dy(th));
        let n = REPARAM_NODES;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let mut s_nodes = Vec::with_capacity(n + 1);
        s_nodes.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let a = i as f64 * step;
            let mid = a + 0.5 * step;
            let half = 0.5 * step;
            let mut panel = 0.0;
            for (gx, gw) in GX.iter().zip(GW.iter()) {
                panel += gw * speed(mid + half * gx);
            }
            acc += panel * half;
            s_nodes.push(acc);
        }
        let total_length = acc;
        let reparam = Reparam {
            s_nodes,
            theta_step: step,
            x: Arc::new(x),
            y: Arc::new(y),
            dx: Arc::new(dx),
            dy: Arc::new(dy),
            d2x: Arc::new(d2x),
            d2y: Arc::new(d2y),
        };
        Self::from_geometry(total_length, Geometry::Parametric(reparam))
    }

    pub fn total_length(&self) -> f64 {
        self.inner.total_length
    }

    /// Curve data at arclength `s` (taken modulo the total length).
    pub fn at(&self, s: f64) -> CurvePoint {
        self.inner.eval(s)
    }

    pub fn xi(&self, s: f64) -> f64 {
        self.at(s).xi
    }

    pub fn eta(&self, s: f64) -> f64 {
        self.at(s).eta
    }

    pub fn tangent(&self, s: f64) -> (f64, f64) {
        let p = self.at(s);
        (p.xi_p, p.eta_p)
    }

    /// Tangent angle at `s` within the grid cell containing `s`, measured on
    /// the monotone lift.
    fn psi_lifted(&self, s: f64) -> f64 {
        let grid = &self.inner.psi_grid;
        let len = self.inner.total_length;
        let k = (s / len).floor();
        let s_base = s - k * len;
        let mut lo = 0usize;
        let mut hi = grid.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if grid[mid].0 <= s_base {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (s_lo, psi_lo) = grid[lo];
        let pl = self.at(s_lo);
        let p = self.at(s_base);
        psi_lo
            + angle_diff(pl.xi_p, pl.eta_p, p.xi_p, p.eta_p)
            + k * 2.0 * std::f64::consts::PI
    }

    /// Solves psi_lift(s) = alpha on the covering line.
    fn invert_psi(&self, alpha: f64) -> Result<f64> {
        let grid = &self.inner.psi_grid;
        let len = self.inner.total_length;
        let psi0 = grid[0].1;
        let two_pi = 2.0 * std::f64::consts::PI;
        let k = ((alpha - psi0) / two_pi).floor();
        let a = alpha - k * two_pi; // in [psi0, psi0 + 2*pi)
        let mut lo = 0usize;
        let mut hi = grid.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if grid[mid].1 <= a {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (mut s_lo, mut s_hi) = (grid[lo].0, grid[lo + 1].0);
        if !(grid[lo].1 <= a && a <= grid[lo + 1].1) {
            return Err(Error::RootNotBracketed);
        }
        // Safeguarded Newton on psi(s) - a, using the curvature as the exact
        // derivative of the tangent angle.
        let mut s = 0.5 * (s_lo + s_hi);
        for _ in 0..100 {
            let g = self.psi_lifted(s) - a;
            if g > 0.0 {
                s_hi = s;
            } else {
                s_lo = s;
            }
            if s_hi - s_lo < 1e-12 {
                break;
            }
            let kappa = self.at(s).curvature();
            let mut s_next = s - g / kappa;
            if !(s_next > s_lo && s_next < s_hi) {
                s_next = 0.5 * (s_lo + s_hi);
            }
            if (s_next - s).abs() < 1e-12 {
                s = s_next;
                break;
            }
            s = s_next;
        }
        Ok(s + k * len)
    }

    /// The two points with vertical tangent in the frame rotated by `phi`:
    /// s1 solves xi' sin(phi) + eta' cos(phi) = -1, s2 solves = +1. The
    /// branch is continuous in phi with s1 < s2 < s1 + L.
    pub fn vertical_tangent_points(&self, phi: f64) -> Result<(f64, f64)> {
        let psi0 = self.inner.psi_grid[0].1;
        let two_pi = 2.0 * std::f64::consts::PI;
        let wrap_into = |target: f64, base: f64| -> f64 {
            let mut v = target - base;
            v -= two_pi * (v / two_pi).floor();
            base + v
        };
        // xi' sin(phi) + eta' cos(phi) = sin(psi + phi); the roots sit at
        // psi = -pi/2 - phi and psi = pi/2 - phi on the lift.
        let a1_base = wrap_into(-std::f64::consts::FRAC_PI_2, psi0);
        let a2_base = wrap_into(std::f64::consts::FRAC_PI_2, a1_base);
        let s1 = self.invert_psi(a1_base - phi)?;
        let s2 = self.invert_psi(a2_base - phi)?;
        Ok((s1, s2))
    }

    /// Curve constants m1 = max |xi eta' - eta xi'|, m2 = max |xi xi' + eta eta'|,
    /// by dense sampling plus golden-section refinement.
    pub fn constants(&self) -> (f64, f64) {
        let f1 = |s: f64| {
            let p = self.at(s);
            (p.xi * p.eta_p - p.eta * p.xi_p).abs()
        };
        let f2 = |s: f64| {
            let p = self.at(s);
            (p.xi * p.xi_p + p.eta * p.eta_p).abs()
        };
        (self.sampled_max(&f1), self.sampled_max(&f2))
    }

    fn sampled_max(&self, f: &dyn Fn(f64) -> f64) -> f64 {
        let n = 10_000;
        let len = self.inner.total_length;
        let mut best = 0.0;
        let mut best_s = 0.0;
        for k in 0..n {
            let s = len * k as f64 / n as f64;
            let v = f(s);
            if v > best {
                best = v;
                best_s = s;
            }
        }
        // Golden-section refinement within the neighboring cells.
        let gr = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut a = best_s - len / n as f64;
        let mut b = best_s + len / n as f64;
        let mut c = b - gr * (b - a);
        let mut d = a + gr * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > 1e-9 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = f(d);
            }
        }
        best.max(fc).max(fd)
    }
}

impl CurveInner {
    fn eval(&self, s: f64) -> CurvePoint {
        let len = self.total_length;
        let mut sw = s % len;
        if sw < 0.0 {
            sw += len;
        }
        match &self.geometry {
            Geometry::Circle { r, cx, cy } => {
                let u = sw / r;
                CurvePoint {
                    xi: cx + r * u.cos(),
                    eta: cy + r * u.sin(),
                    xi_p: -u.sin(),
                    eta_p: u.cos(),
                    xi_pp: -u.cos() / r,
                    eta_pp: -u.sin() / r,
                }
            }
            Geometry::Parametric(rep) => rep.eval(sw),
        }
    }
}

/// Prescribed rotation law phi(t) with its bound c from the tangency
/// condition |phi'| < c, |phi''| < c.
#[derive(Clone, Debug)]
pub struct RotationLaw {
    pub expr: ForcingExpr,
    pub c: f64,
}

impl RotationLaw {
    pub fn new(expr: ForcingExpr, c: f64) -> Result<Self> {
        expr.validate()?;
        if !(c >= 0.0) {
            return Err(Error::InvalidInput(format!("bound c must be >= 0: {c}")));
        }
        let law = Self { expr, c };
        let span = law.expr.period().unwrap_or(100.0);
        for k in 0..10_000 {
            let t = span * k as f64 / 10_000.0;
            if law.phi_dot(t).abs() > c || law.phi_ddot(t).abs() > c {
                return Err(Error::InvalidInput(format!(
                    "rotation law violates |phi'| <= c, |phi''| <= c at t = {t}"
                )));
            }
        }
        Ok(law)
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.expr.eval(t)
    }

    pub fn phi_dot(&self, t: f64) -> f64 {
        self.expr.deriv(t)
    }

    pub fn phi_ddot(&self, t: f64) -> f64 {
        self.expr.second_deriv(t)
    }

    pub fn period(&self) -> Option<f64> {
        self.expr.period()
    }
}

/// Tangency condition |c m1 - c^2 m2| < 1 for the rotating-curve window.
pub fn rotation_condition(c: f64, m1: f64, m2: f64) -> bool {
    (c * m1 - c * c * m2).abs() < 1.0
}
