//! Analytic intervention designs: the open-loop baseline, single-interval
//! distancing (the `R*` and `R^` curves and their goldilocks intersection)
//! and the wait-maintain-suspend strategy.
//!
//! Every synthesized schedule is evaluated the same way: simulate from the
//! outbreak to the report horizon, then extrapolate the open-loop tail in
//! closed form to obtain the final size.

use serde::{Deserialize, Serialize};

use crate::analysis::{herd_immunity, peak_prevalence, s_infinity};
use crate::error::{Error, Result};
use crate::model::{
    advance, simulate, ControlLaw, ControlSchedule, EpiState, ModelParams, Sample, Segment, Trajectory,
    DEFAULT_DT,
};

/// Feasibility band on `|S_inf - S*|`.
pub const S_INF_TOL: f64 = 0.01;
/// Feasibility slack on the peak cap.
pub const PEAK_TOL: f64 = 1e-3;

/// Terminal susceptible target and peak cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemiologicalObjective {
    pub s_star_target: f64,
    pub i_max: f64,
}

impl EpidemiologicalObjective {
    pub fn new(s_star_target: f64, i_max: f64) -> Result<Self> {
        if !(i_max > 0.0 && i_max <= 1.0) {
            return Err(Error::InvalidParams(format!("i_max must lie in (0, 1] (got {i_max})")));
        }
        if !(s_star_target > 0.0 && s_star_target < 1.0) {
            return Err(Error::InvalidParams(format!(
                "s_star_target must lie in (0, 1) (got {s_star_target})"
            )));
        }
        Ok(Self { s_star_target, i_max })
    }

    /// Target the herd-immunity threshold of the uncontrolled epidemic.
    pub fn herd_immunity(params: &ModelParams, i_max: f64) -> Result<Self> {
        Self::new(herd_immunity(params.r_bar)?, i_max)
    }
}

/// Integration step, report horizon and intervention end used by the
/// synthesizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub dt: f64,
    /// Simulated span of the report, days.
    pub horizon: f64,
    /// `tau_f`: every synthesized intervention ends here, days.
    pub intervention_end: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            horizon: 300.0,
            intervention_end: 270.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: String,
    pub schedule: ControlSchedule,
    #[serde(skip)]
    pub trajectory: Trajectory,
    /// Epidemic final size `1 - S_inf`.
    pub efs: f64,
    /// Infected peak prevalence, including any rebound after the horizon.
    pub ipp: f64,
    /// Social distancing index `∫ (r_bar - R) dt`, R·day.
    pub sdi: f64,
    pub s_inf: f64,
    pub final_state: EpiState,
    /// Named times in days (`tau_s`, `tau_1`, `tau_f`, ...).
    pub timings: Vec<(String, f64)>,
    /// Other named scalars (reproduction numbers, residuals, ...).
    pub values: Vec<(String, f64)>,
    pub feasible: bool,
    pub notes: Vec<String>,
}

impl StrategyReport {
    pub fn timing(&self, name: &str) -> Option<f64> {
        lookup(&self.timings, name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        lookup(&self.values, name)
    }
}

fn lookup(items: &[(String, f64)], name: &str) -> Option<f64> {
    items.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
}

/// Simulates `schedule` from `x0` and fills in EFS, IPP and SDI.
pub fn evaluate_schedule(
    name: &str,
    params: &ModelParams,
    objective: &EpidemiologicalObjective,
    schedule: ControlSchedule,
    x0: EpiState,
    horizon: f64,
    dt: f64,
) -> Result<StrategyReport> {
    let t_end = horizon.max(schedule.end_time().unwrap_or(0.0));
    let trajectory = simulate(params, &schedule, x0, t_end, dt)?;
    let final_state = trajectory.final_state();
    let fs = s_infinity(params.r_bar, final_state.s.clamp(0.0, 1.0), final_state.i.max(0.0))?;
    let rebound = peak_prevalence(params.r_bar, final_state.s.clamp(0.0, 1.0), final_state.i.max(0.0))?;
    let ipp = trajectory.max_i().max(rebound);
    let sdi = trajectory.distancing_integral(params.r_bar);
    let feasible = (fs.s_inf - objective.s_star_target).abs() <= S_INF_TOL && ipp <= objective.i_max + PEAK_TOL;
    let mut timings = Vec::new();
    if let Some(end) = schedule.end_time() {
        timings.push(("tau_f".to_string(), end));
    }
    Ok(StrategyReport {
        strategy: name.to_string(),
        schedule,
        trajectory,
        efs: fs.efs,
        ipp,
        sdi,
        s_inf: fs.s_inf,
        final_state,
        timings,
        values: Vec::new(),
        feasible,
        notes: Vec::new(),
    })
}

/// Closed-form `∫_0^horizon (r_bar - R) dt` for constant segments; feedback
/// segments are integrated by the trapezoid rule on a default-step
/// simulation from the outbreak state.
pub fn sdi(schedule: &ControlSchedule, params: &ModelParams, horizon: f64) -> Result<f64> {
    schedule.validate_for(params)?;
    if let Some(end) = schedule.end_time() {
        if horizon + 1e-12 < end {
            return Err(Error::Domain(format!(
                "horizon {horizon} precedes the end of the schedule ({end})"
            )));
        }
    }
    let needs_sim = schedule
        .segments()
        .iter()
        .any(|s| s.law == ControlLaw::InverseSusceptible);
    let traj = if needs_sim {
        Some(simulate(params, schedule, params.initial_state(), horizon, DEFAULT_DT)?)
    } else {
        None
    };
    let mut total = 0.0;
    for seg in schedule.segments() {
        match seg.law {
            ControlLaw::Constant(r) => total += (params.r_bar - r) * (seg.end - seg.start),
            ControlLaw::InverseSusceptible => {
                let traj = traj.as_ref().expect("simulated above");
                let inside: Vec<&Sample> = traj
                    .samples
                    .iter()
                    .filter(|p| p.t >= seg.start - 1e-12 && p.t <= seg.end + 1e-12)
                    .collect();
                for w in inside.windows(2) {
                    let f = |p: &Sample| params.r_bar - ControlLaw::InverseSusceptible.value(p.s, params);
                    total += 0.5 * (f(w[0]) + f(w[1])) * (w[1].t - w[0].t);
                }
            }
        }
    }
    Ok(total)
}

/// Constant reproduction number that, applied from `(s_s, i_s)` until
/// quasi-steady state, leaves `S_inf = s_star`.
pub fn r_star_single(s_star: f64, s_s: f64, i_s: f64) -> Result<f64> {
    if !(s_star > 0.0) {
        return Err(Error::Domain(format!("s_star must be positive (got {s_star})")));
    }
    if !(s_s > s_star) {
        return Err(Error::Domain(format!(
            "intervention must start above the target (S = {s_s}, target = {s_star})"
        )));
    }
    if !(i_s > 0.0) {
        return Err(Error::Domain(format!("I must be positive at the start (got {i_s})")));
    }
    Ok((s_s.ln() - s_star.ln()) / (s_s + i_s - s_star))
}

/// Outcome of solving `peak(R, s_s, i_s) = i_max` for `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PeakCapSolution {
    /// Root inside the bracket.
    Root(f64),
    /// Even the upper bound keeps the peak under the cap.
    Unconstrained(f64),
}

impl PeakCapSolution {
    pub fn value(&self) -> f64 {
        match *self {
            PeakCapSolution::Root(r) | PeakCapSolution::Unconstrained(r) => r,
        }
    }
}

/// Largest constant `R` in `bounds` whose open-loop peak from `(s_s, i_s)`
/// equals `i_max`, found by bisection to `1e-9`.
pub fn r_hat_single(i_max: f64, s_s: f64, i_s: f64, bounds: (f64, f64)) -> Result<PeakCapSolution> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && lo < hi) {
        return Err(Error::Domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    if i_s > i_max {
        return Err(Error::Infeasible(format!(
            "I = {i_s} already exceeds the cap {i_max}"
        )));
    }
    let excess = |r: f64| peak_prevalence(r, s_s, i_s).map(|p| p - i_max);
    if excess(hi)? <= 0.0 {
        return Ok(PeakCapSolution::Unconstrained(hi));
    }
    if excess(lo)? > 0.0 {
        return Err(Error::Infeasible(format!(
            "even R = {lo} gives a peak above {i_max}"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        if excess(m)? > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(PeakCapSolution::Root(0.5 * (a + b)))
}

/// Open-loop state at time `t`, reconstructed from the sample at or before
/// `t` with a partial RK4 step under `law`.
fn state_at(traj: &Trajectory, params: &ModelParams, law: ControlLaw, t: f64) -> (f64, f64) {
    let k = traj.samples.partition_point(|p| p.t <= t).saturating_sub(1);
    let p = &traj.samples[k];
    advance(params, law, (p.s, p.i), t - p.t)
}

/// Bisects a sign change of `f` on `[a, b]` to `tol` days.
fn bisect_time<F>(mut a: f64, mut b: f64, tol: f64, f: F) -> f64
where
    F: Fn(f64) -> f64,
{
    let fa = f(a);
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

const TIME_TOL: f64 = 1e-9;

/// No intervention; the report extrapolates the open-loop tail.
pub fn open_loop(
    params: &ModelParams,
    objective: &EpidemiologicalObjective,
    opts: &SynthesisOptions,
) -> Result<StrategyReport> {
    let mut report = evaluate_schedule(
        "open_loop",
        params,
        objective,
        ControlSchedule::open_loop(),
        params.initial_state(),
        opts.horizon,
        opts.dt,
    )?;
    if let Some(t) = report.trajectory.first_event(crate::model::Condition::PeakI) {
        report.timings.push(("t_peak".into(), t));
    }
    Ok(report)
}

/// `R*(t) - R^(t)` along the open-loop orbit, with `R^` clamped to the
/// admissible bounds.
fn goldilocks_gap(params: &ModelParams, objective: &EpidemiologicalObjective, x: (f64, f64)) -> Option<(f64, bool)> {
    let (s, i) = x;
    let r_star = r_star_single(objective.s_star_target, s, i).ok()?;
    let (r_hat, root) = match r_hat_single(objective.i_max, s, i, (params.r_min, params.r_bar)) {
        Ok(PeakCapSolution::Root(r)) => (r, true),
        Ok(PeakCapSolution::Unconstrained(r)) => (r, false),
        Err(_) => (params.r_min, false),
    };
    Some((r_star - r_hat, root))
}

/// Single constant intervention started where the final-size curve `R*`
/// meets the peak-cap curve `R^`, held until `intervention_end`.
pub fn goldilocks(
    params: &ModelParams,
    objective: &EpidemiologicalObjective,
    opts: &SynthesisOptions,
) -> Result<StrategyReport> {
    params.validate()?;
    let open_law = ControlLaw::Constant(params.r_bar);
    let ol = simulate(params, &ControlSchedule::open_loop(), params.initial_state(), opts.horizon, opts.dt)?;

    let window: Vec<&Sample> = ol
        .samples
        .iter()
        .take_while(|p| p.s > objective.s_star_target && p.i <= objective.i_max)
        .collect();
    if window.len() < 2 {
        return Err(Error::NoGoldilocks("open-loop orbit never admits a single interval".into()));
    }

    let gap_at = |t: f64| goldilocks_gap(params, objective, state_at(&ol, params, open_law, t));
    let mut bracket = None;
    let mut any_root = false;
    let mut prev: Option<(f64, f64)> = None;
    for p in &window {
        let Some((g, root)) = goldilocks_gap(params, objective, (p.s, p.i)) else {
            continue;
        };
        any_root |= root;
        if let Some((t0, g0)) = prev {
            if (g0 < 0.0) != (g < 0.0) {
                bracket = Some((t0, p.t));
                break;
            }
        }
        prev = Some((p.t, g));
    }

    let mut notes = Vec::new();
    let (tau_s, r_g) = match bracket {
        Some((a, b)) => {
            let t = bisect_time(a, b, TIME_TOL, |t| gap_at(t).map_or(f64::NAN, |g| g.0));
            let (s, i) = state_at(&ol, params, open_law, t);
            let (_, root) = goldilocks_gap(params, objective, (s, i)).unwrap_or((0.0, false));
            if !root {
                return Err(Error::NoGoldilocks(format!(
                    "curves meet at t = {t:.4} d outside the admissible range of R"
                )));
            }
            (t, r_star_single(objective.s_star_target, s, i)?)
        }
        None if !any_root => {
            // The cap never binds: act as late as a single interval still
            // steers S to the target.
            notes.push("peak constraint inactive".to_string());
            let r_star_minus_min = |t: f64| {
                let (s, i) = state_at(&ol, params, open_law, t);
                r_star_single(objective.s_star_target, s, i).map_or(-1.0, |r| r - params.r_min)
            };
            let last = window.last().unwrap().t;
            let t = if r_star_minus_min(last) >= 0.0 {
                last
            } else {
                bisect_time(0.0, last, TIME_TOL, r_star_minus_min)
            };
            let (s, i) = state_at(&ol, params, open_law, t);
            (t, r_star_single(objective.s_star_target, s, i)?.max(params.r_min))
        }
        None => {
            return Err(Error::NoGoldilocks(
                "R* and R^ do not cross before S reaches the target".into(),
            ))
        }
    };
    if !(params.r_min..=params.r_bar).contains(&r_g) {
        return Err(Error::NoGoldilocks(format!("R = {r_g} outside the admissible range")));
    }
    if !(opts.intervention_end > tau_s) {
        return Err(Error::InvalidSchedule(format!(
            "intervention end {} precedes the goldilocks start {tau_s}",
            opts.intervention_end
        )));
    }

    let schedule = ControlSchedule::single_interval(tau_s, opts.intervention_end, r_g)?;
    let mut report = evaluate_schedule(
        "goldilocks",
        params,
        objective,
        schedule,
        params.initial_state(),
        opts.horizon,
        opts.dt,
    )?;
    report.timings.insert(0, ("tau_s".into(), tau_s));
    report.values.push(("r_si".into(), r_g));
    report.notes.extend(notes);
    Ok(report)
}

/// Wait until `I` reaches the cap, hold it there with `R = 1/S`, then
/// switch to the constant `R*` that steers `S` to the target.
pub fn wms(
    params: &ModelParams,
    objective: &EpidemiologicalObjective,
    opts: &SynthesisOptions,
) -> Result<StrategyReport> {
    params.validate()?;
    let s_star = objective.s_star_target;
    let i_max = objective.i_max;

    let tau_s = match crate::model::find_time(
        params,
        &ControlSchedule::open_loop(),
        params.initial_state(),
        crate::model::Condition::IRisesTo(i_max),
        opts.horizon,
        opts.dt,
    ) {
        Ok(t) => t,
        Err(Error::NotReached { .. }) => {
            return Err(Error::Infeasible(format!(
                "open-loop I never reaches i_max = {i_max}; no intervention needed"
            )))
        }
        Err(e) => return Err(e),
    };

    let maintain = ControlSchedule::new(vec![Segment {
        start: tau_s,
        end: opts.horizon,
        law: ControlLaw::InverseSusceptible,
    }])?;
    let held = simulate(params, &maintain, params.initial_state(), opts.horizon, opts.dt)?;
    let feedback = ControlLaw::InverseSusceptible;

    // R*(S(t1), I(t1)) - 1/S(t1) and R*(...) - S*, along the maintain phase.
    let gap = |x: (f64, f64)| r_star_single(s_star, x.0, x.1).map(|r| r - 1.0 / x.0).ok();
    let gap_s = |x: (f64, f64)| r_star_single(s_star, x.0, x.1).map(|r| r - s_star).ok();
    let phase: Vec<&Sample> = held
        .samples
        .iter()
        .filter(|p| p.t >= tau_s)
        .take_while(|p| p.s > s_star)
        .collect();

    let find_cross = |f: &dyn Fn((f64, f64)) -> Option<f64>| -> Option<f64> {
        let mut prev: Option<(f64, f64)> = None;
        for p in &phase {
            let Some(g) = f((p.s, p.i)) else { continue };
            if let Some((t0, g0)) = prev {
                if (g0 < 0.0) != (g < 0.0) {
                    return Some(bisect_time(t0, p.t, TIME_TOL, |t| {
                        f(state_at(&held, params, feedback, t)).unwrap_or(f64::NAN)
                    }));
                }
            }
            prev = Some((p.t, g));
        }
        None
    };

    let tau_1 = find_cross(&gap).ok_or_else(|| {
        Error::Infeasible("R* and 1/S do not cross before S reaches the target (infeasible bracket)".into())
    })?;
    let tau_equal_s_star = find_cross(&gap_s);

    let (s1, i1) = state_at(&held, params, feedback, tau_1);
    let r_si = r_star_single(s_star, s1, i1)?;
    if !(params.r_min..=params.r_bar).contains(&r_si) {
        return Err(Error::Infeasible(format!("suspend-phase R = {r_si} outside the admissible range")));
    }
    if !(opts.intervention_end > tau_1) {
        return Err(Error::InvalidSchedule(format!(
            "intervention end {} precedes tau_1 = {tau_1}",
            opts.intervention_end
        )));
    }

    let schedule = ControlSchedule::new(vec![
        Segment {
            start: tau_s,
            end: tau_1,
            law: ControlLaw::InverseSusceptible,
        },
        Segment {
            start: tau_1,
            end: opts.intervention_end,
            law: ControlLaw::Constant(r_si),
        },
    ])?;
    let mut report = evaluate_schedule("wms", params, objective, schedule, params.initial_state(), opts.horizon, opts.dt)?;
    report.timings.insert(0, ("tau_s".into(), tau_s));
    report.timings.insert(1, ("tau_1".into(), tau_1));
    if let Some(t) = tau_equal_s_star {
        report.timings.push(("tau_r_star_eq_s_star".into(), t));
    }
    report.values.push(("r_si".into(), r_si));
    Ok(report)
}
