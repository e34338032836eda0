//! Numerical toolkit for "never-falling" pendulum-type systems: a DOPRI5(4)
//! integrator with dense output and exit detection, forcing/mollifier/curve
//! model builders, Bogolyubov averaging diagnostics, topological shooting
//! along a segment of initial conditions, and periodic-orbit continuation.

pub mod averaging;
pub mod error;
pub mod models;
pub mod ode;
pub mod periodic;
pub mod quad;
pub mod wazewski;

pub use averaging::{
    averaged_field, convergence_study, deviation, mean_value, AveragedSystem, AveragingReport,
};
pub use error::{Error, Result};
pub use models::{
    curve_window, lagrangian_residual, pendulum_field, rotating_curve_field, rotation_condition,
    strip_field,
    ConvexCurve, CurveGate, ForcedSystem, Forcing, ForcingExpr, Mollifier, OscillatoryForcing,
    PendulumGate, RotationLaw, StripFun, StripSystem,
};
pub use ode::{
    integrate, integrate_with_exit, ExitOutcome, ExitReport, State, Trajectory, VectorField,
    Window,
};
pub use periodic::{
    common_period, find_periodic, find_periodic_with_fallback, orbit_window_check, time_t_map,
    verify_upper_lower, PeriodicOrbit, UpperLowerPair, UpperLowerReport,
};
pub use quad::adaptive_simpson;
pub use wazewski::{
    bisect_survivor, recheck_certificate, verify_transversality, BoundarySide, ExitProbe, Segment,
    SurvivalCertificate, TangencyKind, TransversalityReport,
};
