//! Adaptive Simpson quadrature, used for forcing means and arclength integrals.

use crate::error::{Error, Result};

const MAX_DEPTH: usize = 48;

fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure);
    }
    let l = recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)?;
    let r = recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)?;
    Ok(l + r)
}

/// Integrates `f` over `[a, b]` to absolute accuracy `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(b > a) {
        return Err(Error::InvalidInput(format!(
            "quadrature interval [{a}, {b}] is empty"
        )));
    }
    // Split the interval first so periodic integrands do not alias the
    // Simpson nodes (e.g. sin over [0, 2pi] evaluates to an exact zero
    // estimate on the undivided interval).
    let n = 8;
    let h = (b - a) / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let m = 0.5 * (x0 + x1);
        let (f0, f1, fm) = (f(x0), f(x1), f(m));
        let whole = simpson(x0, f0, x1, f1, fm);
        total += recurse(&f, x0, f0, x1, f1, fm, whole, tol / n as f64, MAX_DEPTH)?;
    }
    Ok(total)
}
