//! The dilogarithm on `[1, inf)` and the simplex integral `J`.

use super::quadrature::{integrate, Quad};
use crate::error::{Error, Result};
use crate::stats::Estimate;
use std::f64::consts::PI;

const PI2_6: f64 = PI * PI / 6.0;

/// `Re Li_2(x)` for `x >= 1` from
/// `Li_2(x) = pi^2/6 - int_1^x log(t - 1)/t dt - i pi log x`.
///
/// With `t = 1 + y` the integral is `int_0^{x-1} log(y)/(1+y) dy`. The
/// piece on `[0, min(x-1, 1)]` uses `y = c w^2` to tame the logarithm; the
/// piece beyond 1 uses `y = e^s`, giving the smooth `s / (1 + e^{-s})`.
pub fn dilog_real(x: f64) -> f64 {
    assert!(x >= 1.0, "dilog_real needs x >= 1, got {x}");
    let upper = x - 1.0;
    if upper == 0.0 {
        return PI2_6;
    }
    let near = upper.min(1.0);
    let lower_part = integrate(
        |w| {
            if w == 0.0 {
                return 0.0;
            }
            let y = near * w * w;
            2.0 * near * w * y.ln() / (1.0 + y)
        },
        0.0,
        1.0,
        1e-13,
        4000,
    );
    let mut total = lower_part.value;
    if upper > 1.0 {
        let far = integrate(|s| s / (1.0 + (-s).exp()), 0.0, upper.ln(), 1e-13, 4000);
        total += far.value;
    }
    PI2_6 - total
}

/// `int_0^1 Re Li_2(1 + 1/u) du`, which equals `pi^2/6`.
///
/// `u = w^3` absorbs the `log^2 u` growth at the origin.
pub fn dilog_inverse_integral(abs_tol: f64) -> Quad {
    integrate(
        |w| {
            if w == 0.0 {
                return 0.0;
            }
            let u = w * w * w;
            3.0 * w * w * dilog_real(1.0 + 1.0 / u)
        },
        0.0,
        1.0,
        abs_tol,
        2000,
    )
}

/// Integrand of `J` on the unit cube.
pub fn j_integrand(u: f64, v: f64, w: f64) -> f64 {
    let s = u + v + w;
    if s > 1.0 {
        0.0
    } else {
        (1.0 - s) / (u * v + u * w + v * w)
    }
}

/// `J = int_{u+v+w<=1} (1 - u - v - w) / (uv + uw + vw)`.
///
/// Writing `(u, v, w) = s (a, b, c)` with `a + b + c = 1` factors out
/// `int_0^1 (1 - s) ds = 1/2`, leaving `K = int da db / (ab + ac + bc)` over
/// the triangle, whose only singularities sit at its corners. By symmetry
/// `K` is three times the kite nearest the corner `c = 1`; there
/// `a = rho x`, `b = rho (1 - x)` turns the integrand into the bounded
/// `1 / (1 - rho (1 - x (1 - x)))` on `0 <= rho <= 1 / (1 + max(x, 1 - x))`.
/// The kite is further symmetric in `x <-> 1 - x`, so `J = 3 K_half` with
/// `K_half` the integral over `x in [0, 1/2]`.
pub fn compute_j(abs_tol: f64) -> Result<Estimate> {
    if !(abs_tol >= 1e-6) {
        return Err(Error::InvalidParam(format!("abs_tol must be >= 1e-6, got {abs_tol}")));
    }
    let inner_tol = abs_tol * 1e-3;
    let mut inner_error: f64 = 0.0;
    let outer = integrate(
        |x| {
            let k = 1.0 - x * (1.0 - x);
            let top = 1.0 / (2.0 - x);
            let q = integrate(|rho| 1.0 / (1.0 - k * rho), 0.0, top, inner_tol, 200);
            inner_error = inner_error.max(q.error);
            q.value
        },
        0.0,
        0.5,
        abs_tol * 1e-2,
        200,
    );
    let value = 3.0 * outer.value;
    // The outer range has length 1/2, so the worst inner error bounds the
    // contribution of inner inaccuracy.
    let bound = 3.0 * (outer.error + 0.5 * inner_error);
    if bound > abs_tol {
        return Err(Error::ToleranceNotMet {
            achieved: bound,
            requested: abs_tol,
        });
    }
    Ok(Estimate::new(value, bound))
}
