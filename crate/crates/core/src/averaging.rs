//! Quantitative averaging: compares the lambda-forced flow against the
//! averaged flow and fits the empirical convergence order in 1/lambda.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ForcedSystem;
use crate::ode::{integrate, State, VectorField};
use crate::quad::adaptive_simpson;

/// Mean of `g` over one period by adaptive quadrature (abs error <= 1e-12).
pub fn mean_value(g: impl Fn(f64) -> f64, period: f64) -> Result<f64> {
    if !(period > 0.0) {
        return Err(Error::InvalidInput(format!(
            "period must be positive, got {period}"
        )));
    }
    Ok(adaptive_simpson(g, 0.0, period, 1e-13)? / period)
}

/// A forced system paired with its averaged counterpart and sampled
/// diagnostic bounds for the averaging theorem's hypotheses.
pub struct AveragedSystem {
    pub base: VectorField,
    pub averaged: VectorField,
    pub lambda: f64,
    /// Sampled sup of the field over the study box.
    pub sup_bound: f64,
    /// Sampled Lipschitz estimate over the study box.
    pub lipschitz: f64,
}

/// Builds the averaged system: g(lambda t) is replaced by its period mean.
/// M and mu are estimated from 1e4 seeded random samples in `study_box`.
pub fn averaged_field(sys: &ForcedSystem, study_box: &[(f64, f64)], seed: u64) -> Result<AveragedSystem> {
    let g = sys
        .oscillatory()
        .ok_or_else(|| Error::InvalidInput("system has no declared oscillatory forcing".into()))?;
    let mean = g.mean()?;
    let lambda = g.lambda;
    let base = sys.field();
    let averaged = sys.field_with_mean(mean);
    if study_box.len() != base.dim() {
        return Err(Error::InvalidInput(format!(
            "study box dimension {} does not match field dimension {}",
            study_box.len(),
            base.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup: f64 = 0.0;
    let mut lip: f64 = 0.0;
    for _ in 0..10_000 {
        let t: f64 = rng.gen_range(0.0..100.0);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            study_box
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..hi))
                .collect()
        };
        let y1 = draw(&mut rng);
        let y2 = draw(&mut rng);
        let d1 = base.eval_vec(t, &y1);
        let d2 = base.eval_vec(t, &y2);
        for d in [&d1, &d2] {
            sup = sup.max(d.iter().map(|v| v.abs()).fold(0.0, f64::max));
        }
        let num = d1
            .iter()
            .zip(&d2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let den = y1
            .iter()
            .zip(&y2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if den > 1e-9 {
            lip = lip.max(num / den);
        }
    }
    Ok(AveragedSystem {
        base,
        averaged,
        lambda,
        sup_bound: sup,
        lipschitz: lip,
    })
}

/// Number of uniform samples used for the sup-norm deviation.
const DEVIATION_SAMPLES: usize = 1000;

/// Sup-norm deviation between the forced and averaged flows started from the
/// same initial condition over `[ic.t, ic.t + horizon]`.
pub fn deviation(avg: &AveragedSystem, ic: &State, horizon: f64, tol: f64) -> Result<f64> {
    let t1 = ic.t + horizon;
    let forced = integrate(&avg.base, ic, t1, tol)?;
    let averaged = integrate(&avg.averaged, ic, t1, tol)?;
    let mut worst: f64 = 0.0;
    for k in 0..=DEVIATION_SAMPLES {
        let t = ic.t + horizon * k as f64 / DEVIATION_SAMPLES as f64;
        let a = forced.sample(t)?;
        let b = averaged.sample(t)?;
        let d = a
            .y
            .iter()
            .zip(&b.y)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Lambda-sweep deviation table with the fitted convergence order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AveragingReport {
    pub lambdas: Vec<f64>,
    pub deviations: Vec<f64>,
    pub horizon: f64,
    pub t0: f64,
    pub ic: State,
    /// Least-squares slope of log(deviation) against log(1/lambda).
    pub fitted_order: f64,
    pub sup_bound: f64,
    pub lipschitz: f64,
}

/// Runs `deviation` for each lambda and fits the convergence order. Only
/// deviations above 100*tol enter the fit; if everything sits below 10*tol
/// the forcing never engaged and the fit is degenerate.
pub fn convergence_study(
    make: impl Fn(f64) -> ForcedSystem,
    lambdas: &[f64],
    ic: &State,
    horizon: f64,
    tol: f64,
    study_box: &[(f64, f64)],
    seed: u64,
) -> Result<AveragingReport> {
    if lambdas.len() < 4 {
        return Err(Error::InvalidInput("need at least 4 lambdas".into()));
    }
    if !lambdas.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput("lambdas must be strictly increasing".into()));
    }
    let mut deviations = Vec::with_capacity(lambdas.len());
    let mut sup_bound: f64 = 0.0;
    let mut lipschitz: f64 = 0.0;
    for &lambda in lambdas {
        let sys = make(lambda);
        let avg = averaged_field(&sys, study_box, seed)?;
        sup_bound = sup_bound.max(avg.sup_bound);
        lipschitz = lipschitz.max(avg.lipschitz);
        deviations.push(deviation(&avg, ic, horizon, tol)?);
    }
    if deviations.iter().all(|&d| d < 10.0 * tol) {
        return Err(Error::DegenerateFit);
    }
    // Least-squares slope of log(delta) vs log(1/lambda) on usable points.
    let pts: Vec<(f64, f64)> = lambdas
        .iter()
        .zip(&deviations)
        .filter(|(_, &d)| d > 100.0 * tol)
        .map(|(&l, &d)| ((1.0 / l).ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let fitted_order = sxy / sxx;
    Ok(AveragingReport {
        lambdas: lambdas.to_vec(),
        deviations,
        horizon,
        t0: ic.t,
        ic: ic.clone(),
        fitted_order,
        sup_bound,
        lipschitz,
    })
}
