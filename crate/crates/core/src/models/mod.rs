//! Mechanical model families: pendulum with a moving pivot, planar strip
//! systems, and a rotating convex curve with a sliding point.

pub mod curve;
pub mod forcing;
pub mod mollifier;
pub mod system;

pub use curve::{rotation_condition, ConvexCurve, CurvePoint, RotationLaw};
pub use forcing::{Forcing, ForcingExpr, OscillatoryForcing};
pub use mollifier::{smooth_step, Mollifier, PendulumGate};
pub use system::{
    curve_window, lagrangian_residual, pendulum_field, rotating_curve_field, strip_field,
    CurveGate, ForcedSystem, StripFun, StripSystem,
};
