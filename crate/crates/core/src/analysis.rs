//! Closed-form epidemic metrics and stability diagnostics for the
//! uncontrolled model: herd immunity, final size, peak prevalence, the
//! maximizer of the final susceptible fraction, and the Lyapunov function
//! whose level sets are the open-loop orbits.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lambert::lambert_w0;
use crate::model::{EpiState, Trajectory};

/// `I` below this value counts as a quasi-steady state.
pub const QSS_THRESHOLD: f64 = 1e-6;

/// Herd-immunity threshold `S* = min(1, 1/r)`.
pub fn herd_immunity(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return domain(format!("reproduction number must be positive (got {r})"));
    }
    Ok((1.0 / r).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalSize {
    /// Limit of `S` as time goes to infinity.
    pub s_inf: f64,
    /// Epidemic final size, `1 - s_inf`.
    pub efs: f64,
}

fn check_pair(s0: f64, i0: f64) -> Result<()> {
    EpiState::new(s0, i0).map(|_| ())
}

/// Limit of `S` for the open-loop system started at `(s0, i0)` with
/// reproduction number `r`: `S_inf = -W0(-r s0 exp(-r (s0 + i0))) / r`.
///
/// With `i0 = 0` and `s0 > 1/r` this returns the `i0 -> 0+` limit, not `s0`.
pub fn s_infinity(r: f64, s0: f64, i0: f64) -> Result<FinalSize> {
    herd_immunity(r)?;
    check_pair(s0, i0)?;
    let z = -r * s0 * (-r * (s0 + i0)).exp();
    // On the constraint set z >= -1/e analytically; rounding can push it a
    // hair below, which lambert_w0 tolerates.
    let w = lambert_w0(z)?;
    let s_inf = (-w / r).clamp(0.0, s0.max(0.0));
    Ok(FinalSize {
        s_inf,
        efs: 1.0 - s_inf,
    })
}

/// Peak of `I` for the open-loop system started at `(s0, i0)`.
///
/// Returns `i0` when `s0 r <= 1` since `I` is then non-increasing.
pub fn peak_prevalence(r: f64, s0: f64, i0: f64) -> Result<f64> {
    herd_immunity(r)?;
    check_pair(s0, i0)?;
    if s0 * r <= 1.0 {
        return Ok(i0);
    }
    Ok(i0 + s0 - (1.0 + (s0 * r).ln()) / r)
}

/// Maximum of `S_inf(r, S, I)` over initial states with `I >= delta`,
/// attained at `(S*, delta)`.
pub fn max_s_infinity(r: f64, delta: f64) -> Result<(f64, EpiState)> {
    let s_star = herd_immunity(r)?;
    if !(0.0..=1.0).contains(&delta) {
        return domain(format!("delta must lie in [0, 1] (got {delta})"));
    }
    let argmax = EpiState::new(s_star, delta).map_err(|_| {
        Error::Domain(format!(
            "delta = {delta} leaves no room above S* = {s_star} in the simplex"
        ))
    })?;
    let z = -r * s_star * (-r * (s_star + delta)).exp();
    let value = -lambert_w0(z)? / r;
    Ok((value.min(s_star), argmax))
}

/// `V(S, I) = S - s_bar - s_bar ln(S / s_bar) + I`.
pub fn lyapunov_value(state: EpiState, s_bar: f64) -> Result<f64> {
    if !(state.s > 0.0) {
        return domain(format!("Lyapunov function needs S > 0 (got {})", state.s));
    }
    if !(s_bar > 0.0) {
        return domain(format!("Lyapunov centre needs s_bar > 0 (got {s_bar})"));
    }
    Ok(state.s - s_bar - s_bar * (state.s / s_bar).ln() + state.i)
}

/// Time derivative of [`lyapunov_value`] along open-loop solutions, in
/// dimensionless time: `I (r s_bar - 1)`.
pub fn lyapunov_rate(state: EpiState, r: f64, s_bar: f64) -> Result<f64> {
    if !(state.s > 0.0) {
        return domain(format!("Lyapunov function needs S > 0 (got {})", state.s));
    }
    if !(s_bar > 0.0) {
        return domain(format!("Lyapunov centre needs s_bar > 0 (got {s_bar})"));
    }
    Ok(state.i * (r * s_bar - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumClass {
    pub s_bar: f64,
    pub label: Stability,
}

/// Disease-free equilibria `(s_bar, 0)` are stable iff `s_bar <= S*`.
pub fn classify_equilibrium(s_bar: f64, r: f64) -> Result<EquilibriumClass> {
    let s_star = herd_immunity(r)?;
    if !(0.0..=1.0).contains(&s_bar) {
        return domain(format!("s_bar must lie in [0, 1] (got {s_bar})"));
    }
    let label = if s_bar <= s_star {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    Ok(EquilibriumClass { s_bar, label })
}

/// Trapezoidal `∫ I dτ` over a trajectory that has reached quasi-steady state.
pub fn auc_infected(trajectory: &Trajectory) -> Result<f64> {
    let end = trajectory.last();
    if end.i >= QSS_THRESHOLD {
        return Err(Error::NotConverged(format!(
            "I(end) = {:e} has not fallen below {QSS_THRESHOLD:e}",
            end.i
        )));
    }
    Ok(trajectory
        .samples
        .windows(2)
        .map(|w| 0.5 * (w[0].i + w[1].i) * (w[1].tau - w[0].tau))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: f64 = 2.9;

    #[test]
    fn herd_immunity_values() {
        assert!((herd_immunity(2.9).unwrap() - 0.3448).abs() < 5e-5);
        assert_eq!(herd_immunity(0.5).unwrap(), 1.0);
        assert_eq!(herd_immunity(1.0).unwrap(), 1.0);
        assert!(herd_immunity(0.0).is_err());
        assert!(herd_immunity(-1.0).is_err());
    }

    #[test]
    fn s_infinity_tends_to_s_star_from_s_star() {
        let s_star = 1.0 / R;
        let fs = s_infinity(R, s_star, 1e-12).unwrap();
        assert!((fs.s_inf - s_star).abs() < 1e-5);
        assert_eq!(fs.efs, 1.0 - fs.s_inf);
    }

    #[test]
    fn s_infinity_rejects_states_off_the_simplex() {
        assert!(s_infinity(R, 0.8, 0.3).is_err());
        assert!(s_infinity(0.0, 0.8, 0.1).is_err());
    }

    #[test]
    fn second_wave_final_size() {
        let fs = s_infinity(R, 0.7, 1e-9).unwrap();
        assert!((fs.s_inf - 0.13).abs() < 0.01, "{}", fs.s_inf);
    }

    #[test]
    fn peak_branches() {
        let s_star = 1.0 / R;
        assert!((peak_prevalence(R, s_star, 0.02).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(peak_prevalence(0.9, 1.0 - 0.01, 0.01).unwrap(), 0.01);
        let p = peak_prevalence(R, 1.0 - 1.49e-5, 1.49e-5).unwrap();
        assert!((p - 0.288).abs() < 5e-4);
    }

    #[test]
    fn max_s_infinity_at_zero_delta_is_s_star() {
        let (v, arg) = max_s_infinity(R, 0.0).unwrap();
        assert!((v - 1.0 / R).abs() < 1e-6);
        assert_eq!(arg, EpiState { s: 1.0 / R, i: 0.0 });
        let (v, arg) = max_s_infinity(0.5, 0.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(arg.s, 1.0);
        assert!(max_s_infinity(0.5, 0.2).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let s_star = 1.0 / R;
        assert_eq!(lyapunov_value(EpiState { s: s_star, i: 0.0 }, s_star).unwrap(), 0.0);
        // 0.9 - S* - S* ln(0.9 * 2.9) + 0.065, evaluated independently.
        let v = lyapunov_value(EpiState { s: 0.9, i: 0.065 }, s_star).unwrap();
        assert!((v - 0.289_361_992_643_240_6).abs() < 1e-12);
        assert!(lyapunov_value(EpiState { s: 0.0, i: 0.1 }, s_star).is_err());

        assert_eq!(lyapunov_rate(EpiState { s: 0.5, i: 0.0 }, R, 0.2).unwrap(), 0.0);
        assert!(lyapunov_rate(EpiState { s: 0.5, i: 0.1 }, R, s_star).unwrap().abs() < 1e-16);
        let rate = lyapunov_rate(EpiState { s: 0.5, i: 0.1 }, R, 0.2).unwrap();
        assert!((rate + 0.042).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_labels() {
        assert_eq!(classify_equilibrium(0.3, R).unwrap().label, Stability::Stable);
        assert_eq!(classify_equilibrium(1.0, R).unwrap().label, Stability::Unstable);
        assert_eq!(classify_equilibrium(1.0, 0.9).unwrap().label, Stability::Stable);
        assert_eq!(classify_equilibrium(1.0 / R, R).unwrap().label, Stability::Stable);
        assert!(classify_equilibrium(1.5, R).is_err());
    }

    #[test]
    fn auc_of_empty_epidemic_is_zero() {
        let p = crate::model::ModelParams::benchmark();
        let traj = crate::model::simulate(
            &p,
            &crate::model::ControlSchedule::open_loop(),
            EpiState { s: 0.9, i: 0.0 },
            20.0,
            0.01,
        )
        .unwrap();
        assert_eq!(auc_infected(&traj).unwrap(), 0.0);
    }
}
