//! Experiment dispatch and artifact emission.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use neverfall_core::periodic::{common_period, find_periodic_with_fallback, orbit_window_check};
use neverfall_core::wazewski::bisect_survivor;
use neverfall_core::{
    convergence_study, integrate, integrate_with_exit, rotation_condition, AveragingReport,
    RotationLaw, Trajectory,
};

use crate::scenario::{segment_of, state_of, ExperimentSpec, ModelSpec, Scenario};
use crate::RunError;

fn core_err(e: neverfall_core::Error) -> RunError {
    match e {
        neverfall_core::Error::InvalidInput(m) => RunError::Validation(m),
        other => RunError::Numerical(other.to_string()),
    }
}

fn io_err(e: std::io::Error) -> RunError {
    RunError::Numerical(format!("io error: {e}"))
}

/// Collects the artifact files written so far, so the manifest can list them
/// even when the run fails halfway.
pub struct Artifacts {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(io_err)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write_json(&mut self, name: &str, value: &Value) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| RunError::Numerical(format!("serialization: {e}")))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(io_err)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Uniformly sampled trajectory CSV: 17 significant digits, LF endings.
    fn write_trajectory(
        &mut self,
        name: &str,
        header: &str,
        traj: &Trajectory,
        samples: usize,
    ) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io_err)?);
        out.write_all(header.as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
        let (t0, t1) = (traj.t_start(), traj.t_end());
        for k in 0..=samples {
            let t = t0 + (t1 - t0) * k as f64 / samples as f64;
            let s = traj.sample(t).map_err(core_err)?;
            writeln!(out, "{:.16e},{:.16e},{:.16e}", t, s.y[0], s.y[1]).map_err(io_err)?;
        }
        out.flush().map_err(io_err)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

const TRAJECTORY_SAMPLES: usize = 1000;
const ORBIT_SAMPLES: usize = 1024;

pub fn run(
    scenario: &Scenario,
    artifacts: &mut Artifacts,
    seed: u64,
    verbose: bool,
) -> Result<Value, RunError> {
    match &scenario.experiment {
        ExperimentSpec::Simulate { ic, t_max, tol } => {
            let sys = scenario.model.build()?;
            let field = sys.field();
            if verbose {
                eprintln!("simulate: ic {ic:?}, t_max {t_max}, tol {tol:e}");
            }
            let traj = integrate(&field, &state_of(ic), *t_max, *tol).map_err(core_err)?;
            artifacts.write_trajectory(
                "trajectory.csv",
                scenario.model.csv_header(),
                &traj,
                TRAJECTORY_SAMPLES,
            )?;
            let end = traj.end_state();
            Ok(json!({
                "experiment": "simulate",
                "t_end": end.t,
                "end_state": end.y,
                "steps": traj.len(),
            }))
        }
        ExperimentSpec::Survive {
            segment,
            t_max,
            xi_tol,
            tol,
        } => {
            let sys = scenario.model.build()?;
            let field = sys.field();
            let window = scenario.model.window(*t_max)?;
            let seg = match segment {
                Some(s) => segment_of(s)?,
                None => scenario.model.default_segment()?,
            };
            if verbose {
                eprintln!("survive: t_max {t_max}, xi_tol {xi_tol:e}, tol {tol:e}");
            }
            let cert =
                bisect_survivor(&field, &seg, &window, *t_max, *xi_tol, *tol).map_err(core_err)?;
            artifacts.write_json(
                "certificate.json",
                &serde_json::to_value(&cert)
                    .map_err(|e| RunError::Numerical(format!("serialization: {e}")))?,
            )?;
            let rep = integrate_with_exit(&field, &cert.ic_star, *t_max, &window, *tol)
                .map_err(core_err)?;
            artifacts.write_trajectory(
                "survivor.csv",
                scenario.model.csv_header(),
                &rep.trajectory,
                TRAJECTORY_SAMPLES,
            )?;
            Ok(json!({
                "experiment": "survive",
                "outcome": cert.outcome_star,
                "xi_star": cert.xi_star,
                "ic_star": cert.ic_star.y,
                "bracket_width": cert.bracket_width,
                "probes": cert.exit_log.len(),
                "survived_until": rep.t_exit.unwrap_or(*t_max),
            }))
        }
        ExperimentSpec::Average {
            lambdas,
            ic,
            horizon,
            tol,
            study_box,
        } => {
            let study_box: Vec<(f64, f64)> = match study_box {
                Some(b) => b.iter().map(|p| (p[0], p[1])).collect(),
                None => scenario.model.default_study_box()?,
            };
            // Pre-validate every swept system so the sweep closure can't hit
            // a construction error mid-run.
            for &l in lambdas {
                scenario.model.with_lambda(l).build()?;
            }
            let model = scenario.model.clone();
            if verbose {
                eprintln!("average: lambdas {lambdas:?}, horizon {horizon}");
            }
            let report: AveragingReport = convergence_study(
                |l| model.with_lambda(l).build().expect("validated above"),
                lambdas,
                &state_of(ic),
                *horizon,
                *tol,
                &study_box,
                seed,
            )
            .map_err(core_err)?;
            artifacts.write_json(
                "averaging.json",
                &serde_json::to_value(&report)
                    .map_err(|e| RunError::Numerical(format!("serialization: {e}")))?,
            )?;
            Ok(json!({
                "experiment": "average",
                "fitted_order": report.fitted_order,
                "deviations": report.deviations,
            }))
        }
        ExperimentSpec::Periodic {
            seed_ic,
            period,
            tol,
            t_max,
        } => {
            let sys = scenario.model.build()?;
            let field = sys.field();
            let window = scenario.model.window(*t_max)?;
            let period = match period {
                Some(p) => *p,
                None => common_period(&scenario.model.forcing_periods()?).map_err(core_err)?,
            };
            let seed_state = match seed_ic {
                Some(ic) => state_of(ic),
                None => {
                    // Default seed: the survival certificate's midpoint, which
                    // shadows the hyperbolic orbit.
                    let seg = scenario.model.default_segment()?;
                    let cert = bisect_survivor(&field, &seg, &window, *t_max, 1e-12, *tol)
                        .map_err(core_err)?;
                    cert.ic_star
                }
            };
            if verbose {
                eprintln!("periodic: T {period}, seed {:?}", seed_state.y);
            }
            let orbit = find_periodic_with_fallback(&field, period, &seed_state, *tol, &window)
                .map_err(core_err)?;
            let contained = orbit_window_check(&field, &orbit, &window).map_err(core_err)?;
            artifacts.write_json(
                "orbit.json",
                &serde_json::to_value(&orbit)
                    .map_err(|e| RunError::Numerical(format!("serialization: {e}")))?,
            )?;
            let traj = integrate(&field, &orbit.ic, orbit.period, *tol).map_err(core_err)?;
            artifacts.write_trajectory(
                "orbit.csv",
                scenario.model.csv_header(),
                &traj,
                ORBIT_SAMPLES,
            )?;
            Ok(json!({
                "experiment": "periodic",
                "period": orbit.period,
                "residual": orbit.residual,
                "ic": orbit.ic.y,
                "multipliers": orbit.multipliers,
                "monodromy_det": orbit.monodromy_det,
                "window_contained": contained,
            }))
        }
        ExperimentSpec::CurveInfo { phi_grid } => {
            let ModelSpec::RotatingCurve { curve, law, .. } = &scenario.model else {
                return Err(RunError::Validation(
                    "curve-info requires model.kind = rotating_curve".into(),
                ));
            };
            let curve = curve.build()?;
            let law = RotationLaw::new(law.expr.clone(), law.c).map_err(core_err)?;
            let (m1, m2) = curve.constants();
            let mut table = Vec::with_capacity(*phi_grid);
            for k in 0..*phi_grid {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / *phi_grid as f64;
                let (s1, s2) = curve.vertical_tangent_points(phi).map_err(core_err)?;
                table.push(json!({"phi": phi, "s1": s1, "s2": s2}));
            }
            let info = json!({
                "total_length": curve.total_length(),
                "m1": m1,
                "m2": m2,
                "c": law.c,
                "rotation_condition": rotation_condition(law.c, m1, m2),
                "vertical_tangents": table,
            });
            artifacts.write_json("curve_info.json", &info)?;
            Ok(json!({
                "experiment": "curve-info",
                "total_length": curve.total_length(),
                "m1": m1,
                "m2": m2,
            }))
        }
    }
}
