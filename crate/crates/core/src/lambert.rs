//! Principal branch of the Lambert W function on the real line.
//!
//! `W0(z)` is the solution `w >= -1` of `w * exp(w) = z`, defined for
//! `z >= -1/e`. Every final-size computation in this crate goes through it.

use std::f64::consts::E;

use crate::error::{domain, Result};

/// Absolute slack accepted below the branch point `-1/e`.
pub const BRANCH_SLACK: f64 = 1e-12;

const MAX_ITERATIONS: usize = 50;
const INV_E: f64 = 1.0 / E;

/// Evaluates the principal branch `W0(z)`.
///
/// Halley iteration started from the branch-point expansion near `-1/e`,
/// from `z` itself for small arguments and from `ln z - ln ln z` for large
/// ones. Arguments within [`BRANCH_SLACK`] below `-1/e` are snapped to the
/// branch point and return `-1`.
pub fn lambert_w0(z: f64) -> Result<f64> {
    if z.is_nan() {
        return domain("lambert_w0 of NaN");
    }
    if z.is_infinite() {
        return if z > 0.0 {
            Ok(f64::INFINITY)
        } else {
            domain("lambert_w0 of -inf")
        };
    }
    let offset = z + INV_E;
    if offset < -BRANCH_SLACK {
        return domain(format!("lambert_w0 argument {z} is below -1/e"));
    }
    if offset <= 0.0 {
        return Ok(-1.0);
    }
    if z == 0.0 {
        return Ok(0.0);
    }

    let mut w = initial_guess(z);
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1.abs() < 1e-300 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        let next = (w - step).max(-1.0);
        let converged = (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs());
        w = next;
        if converged {
            break;
        }
    }
    Ok(w)
}

fn initial_guess(z: f64) -> f64 {
    if z < -0.25 {
        // Series in p = sqrt(2 (1 + e z)) around the branch point.
        let p = (2.0 * (1.0 + E * z)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if z < E {
        // w ~ z near the origin; the log1p form keeps the guess bounded for z up to e.
        if z.abs() < 0.5 {
            z
        } else {
            z.ln_1p() * 0.9
        }
    } else {
        let l1 = z.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}
