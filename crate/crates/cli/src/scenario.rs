//! Scenario schema and construction of core objects from it.
//!
//! A scenario is one JSON document: a model (pendulum, strip, or
//! rotating_curve), an experiment (simulate, survive, average, periodic,
//! curve-info), and an optional RNG seed for sampled diagnostics.

use serde::{Deserialize, Serialize};

use neverfall_core::models::StripFun;
use neverfall_core::ode::Window;
use neverfall_core::wazewski::{curve_segment, pendulum_segment, strip_segment, Segment};
use neverfall_core::{
    curve_window, ConvexCurve, CurveGate, ForcedSystem, Forcing, ForcingExpr, Mollifier,
    OscillatoryForcing, PendulumGate, RotationLaw, State, StripSystem,
};

use crate::RunError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSpec,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Pendulum {
        f: ForcingExpr,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<ForcingExpr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        /// Mollifier collar width; when present the forcing is gated off
        /// near the window boundary.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gate_delta: Option<f64>,
    },
    Strip {
        v: StripFun,
        w: StripFun,
        u: ForcingExpr,
        lambda: f64,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default = "default_x_range")]
        x_range: (f64, f64),
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gate_delta: Option<f64>,
    },
    RotatingCurve {
        curve: CurveSpec,
        law: LawSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g: Option<ForcingExpr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gate_delta: Option<f64>,
    },
}

fn default_margin() -> f64 {
    0.1
}

fn default_x_range() -> (f64, f64) {
    (-10.0, 10.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle { r: f64 },
    Ellipse { a: f64, b: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub expr: ForcingExpr,
    pub c: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    Simulate {
        ic: [f64; 2],
        #[serde(default = "default_t_max")]
        t_max: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Survive {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        segment: Option<[[f64; 2]; 2]>,
        #[serde(default = "default_t_max")]
        t_max: f64,
        #[serde(default = "default_xi_tol")]
        xi_tol: f64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Average {
        lambdas: Vec<f64>,
        ic: [f64; 2],
        #[serde(default = "default_horizon")]
        horizon: f64,
        #[serde(default = "default_avg_tol")]
        tol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        study_box: Option<[[f64; 2]; 2]>,
    },
    Periodic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed_ic: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<f64>,
        #[serde(default = "default_periodic_tol")]
        tol: f64,
        #[serde(default = "default_t_max")]
        t_max: f64,
    },
    #[serde(rename = "curve-info")]
    CurveInfo {
        #[serde(default = "default_phi_grid")]
        phi_grid: usize,
    },
}

fn default_t_max() -> f64 {
    30.0
}

fn default_tol() -> f64 {
    1e-10
}

fn default_xi_tol() -> f64 {
    1e-12
}

fn default_horizon() -> f64 {
    5.0
}

fn default_avg_tol() -> f64 {
    1e-11
}

fn default_periodic_tol() -> f64 {
    1e-9
}

fn default_phi_grid() -> usize {
    64
}

fn invalid(msg: impl Into<String>) -> RunError {
    RunError::Validation(msg.into())
}

fn core_err(e: neverfall_core::Error) -> RunError {
    match e {
        neverfall_core::Error::InvalidInput(m) => RunError::Validation(m),
        other => RunError::Numerical(other.to_string()),
    }
}

impl ModelSpec {
    /// The lambda to substitute when the `average` experiment sweeps it.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut spec = self.clone();
        match &mut spec {
            ModelSpec::Pendulum { lambda: l, .. } | ModelSpec::RotatingCurve { lambda: l, .. } => {
                *l = Some(lambda)
            }
            ModelSpec::Strip { lambda: l, .. } => *l = lambda,
        }
        spec
    }

    pub fn build(&self) -> Result<ForcedSystem, RunError> {
        match self {
            ModelSpec::Pendulum {
                f,
                g,
                lambda,
                gate_delta,
            } => {
                let f = Forcing::new(f.clone()).map_err(core_err)?;
                let g = match (g, lambda) {
                    (None, _) => None,
                    (Some(expr), Some(l)) => {
                        Some(OscillatoryForcing::new(expr.clone(), *l).map_err(core_err)?)
                    }
                    (Some(_), None) => {
                        return Err(invalid("model.lambda is required when model.g is set"))
                    }
                };
                let sigma = gate_delta
                    .map(PendulumGate::standard)
                    .transpose()
                    .map_err(core_err)?;
                Ok(ForcedSystem::Pendulum { f, g, sigma })
            }
            ModelSpec::Strip {
                v,
                w,
                u,
                lambda,
                margin,
                x_range,
                gate_delta,
            } => {
                let u = OscillatoryForcing::new(u.clone(), *lambda).map_err(core_err)?;
                let sys = StripSystem::new(v.clone(), w.clone(), u, *margin, *x_range)
                    .map_err(core_err)?;
                let sigma = gate_delta
                    .map(|d| Mollifier::new(vec![(-1.0 - d / 2.0, -1.0 + d / 2.0),
                                                 (1.0 - d / 2.0, 1.0 + d / 2.0)], d / 2.0))
                    .transpose()
                    .map_err(core_err)?;
                Ok(ForcedSystem::Strip { sys, sigma })
            }
            ModelSpec::RotatingCurve {
                curve,
                law,
                g,
                lambda,
                gate_delta,
            } => {
                let curve = curve.build()?;
                let law = RotationLaw::new(law.expr.clone(), law.c).map_err(core_err)?;
                let g = match (g, lambda) {
                    (None, _) => None,
                    (Some(expr), Some(l)) => {
                        Some(OscillatoryForcing::new(expr.clone(), *l).map_err(core_err)?)
                    }
                    (Some(_), None) => {
                        return Err(invalid("model.lambda is required when model.g is set"))
                    }
                };
                let sigma = gate_delta
                    .map(|d| CurveGate::new(curve.clone(), law.clone(), d))
                    .transpose()
                    .map_err(core_err)?;
                Ok(ForcedSystem::RotatingCurve {
                    curve,
                    law,
                    g,
                    sigma,
                })
            }
        }
    }

    /// The exit window of the model's topological experiment.
    pub fn window(&self, t_max: f64) -> Result<Window, RunError> {
        match self {
            ModelSpec::Pendulum { .. } => Ok(Window::constant(0, 0.0, std::f64::consts::PI)),
            ModelSpec::Strip { .. } => Ok(Window::constant(1, -1.0, 1.0)),
            ModelSpec::RotatingCurve { curve, law, .. } => {
                let curve = curve.build()?;
                let law = RotationLaw::new(law.expr.clone(), law.c).map_err(core_err)?;
                curve_window(&curve, &law, 0.0, t_max + 1.0, 200).map_err(core_err)
            }
        }
    }

    /// Default shooting segment across the window at t = 0.
    pub fn default_segment(&self) -> Result<Segment, RunError> {
        match self {
            ModelSpec::Pendulum { .. } => Ok(pendulum_segment()),
            ModelSpec::Strip { .. } => Ok(strip_segment()),
            ModelSpec::RotatingCurve { curve, law, .. } => {
                let curve = curve.build()?;
                let law = RotationLaw::new(law.expr.clone(), law.c).map_err(core_err)?;
                let h = 1e-5;
                let (s1, s2) = curve
                    .vertical_tangent_points(law.phi(0.0))
                    .map_err(core_err)?;
                let (s1m, s2m) = curve
                    .vertical_tangent_points(law.phi(-h))
                    .map_err(core_err)?;
                let (s1p, s2p) = curve
                    .vertical_tangent_points(law.phi(h))
                    .map_err(core_err)?;
                Ok(curve_segment(
                    s1,
                    (s1p - s1m) / (2.0 * h),
                    s2,
                    (s2p - s2m) / (2.0 * h),
                ))
            }
        }
    }

    /// Periods of every declared forcing, for the common-period computation.
    pub fn forcing_periods(&self) -> Result<Vec<f64>, RunError> {
        let mut periods = Vec::new();
        match self {
            ModelSpec::Pendulum { f, g, lambda, .. } => {
                if let Some(p) = f.period() {
                    periods.push(p);
                }
                if let (Some(g), Some(l)) = (g, lambda) {
                    if let Some(p) = g.period() {
                        periods.push(p / l);
                    }
                }
            }
            ModelSpec::Strip { u, lambda, .. } => {
                if let Some(p) = u.period() {
                    periods.push(p / lambda);
                }
            }
            ModelSpec::RotatingCurve { law, g, lambda, .. } => {
                if let Some(p) = law.expr.period() {
                    periods.push(p);
                }
                if let (Some(g), Some(l)) = (g, lambda) {
                    if let Some(p) = g.period() {
                        periods.push(p / l);
                    }
                }
            }
        }
        if periods.is_empty() {
            return Err(invalid(
                "periodic experiment needs at least one periodic forcing",
            ));
        }
        Ok(periods)
    }

    /// CSV header for this model's phase coordinates.
    pub fn csv_header(&self) -> &'static str {
        match self {
            ModelSpec::Strip { .. } => "t,x,y",
            _ => "t,q,v",
        }
    }

    /// Sensible default study box for sampled averaging diagnostics.
    pub fn default_study_box(&self) -> Result<Vec<(f64, f64)>, RunError> {
        match self {
            ModelSpec::Pendulum { .. } => Ok(vec![(0.0, std::f64::consts::PI), (-2.0, 2.0)]),
            ModelSpec::Strip { x_range, .. } => Ok(vec![*x_range, (-1.0, 1.0)]),
            ModelSpec::RotatingCurve { curve, .. } => {
                let c = curve.build()?;
                Ok(vec![(0.0, c.total_length()), (-2.0, 2.0)])
            }
        }
    }
}

impl CurveSpec {
    pub fn build(&self) -> Result<ConvexCurve, RunError> {
        match self {
            CurveSpec::Circle { r } => ConvexCurve::circle(*r).map_err(core_err),
            CurveSpec::Ellipse { a, b } => ConvexCurve::ellipse(*a, *b).map_err(core_err),
        }
    }
}

pub fn state_of(ic: &[f64; 2]) -> State {
    State::new(0.0, ic.to_vec())
}

pub fn segment_of(seg: &[[f64; 2]; 2]) -> Result<Segment, RunError> {
    Segment::new(state_of(&seg[0]), state_of(&seg[1])).map_err(core_err)
}

pub fn load(path: &std::path::Path) -> Result<Scenario, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read scenario {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("invalid scenario: {e}")))
}
