//! SDI-minimizing optimal control.
//!
//! The control is piecewise constant on a uniform grid over `[0, T]` and
//! `r_bar` afterwards. Three problems share the machinery:
//!
//! * [`solve_p_opt`]: minimize the SDI subject to `I <= i_max` on the dense
//!   simulation grid and `S(T) = S*`, by an augmented-Lagrangian outer loop
//!   around a projected (spectral) gradient descent with central
//!   finite-difference gradients, warm-started from wait-maintain-suspend.
//! * [`solve_weighted`]: the unconstrained `∫ a_I I + a_R (r_bar - R)` variant.
//! * [`solve_quantized`]: levels from a finite set held for whole dwell
//!   slots, solved by beam search followed by single-slot swaps.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{peak_prevalence, s_infinity, QSS_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{rk4_step, ControlLaw, ControlSchedule, EpiState, ModelParams, Segment, DEFAULT_DT};
use crate::strategies::{evaluate_schedule, wms, EpidemiologicalObjective, StrategyReport, SynthesisOptions, PEAK_TOL};

/// Settings of the constrained continuous solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    /// Optimization horizon `T`, days.
    pub t_horizon: f64,
    /// Number of uniform control intervals on `[0, T]`.
    pub n_intervals: usize,
    pub i_max: f64,
    pub s_star_target: f64,
    /// Accepted residual on both the peak cap and `|S(T) - S*|`.
    pub terminal_tol: f64,
    /// Penalty weight used at each outer iteration (the last one repeats).
    pub penalty_schedule: Vec<f64>,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    /// Integration step inside the optimizer, days.
    pub dt: f64,
    /// Integration step of the final verification and report, days.
    pub verify_dt: f64,
    /// Simulated span of the report, days.
    pub report_horizon: f64,
    /// Central finite-difference step on each control value.
    pub fd_step: f64,
}

impl OptConfig {
    pub fn new(objective: &EpidemiologicalObjective) -> Self {
        Self {
            t_horizon: 270.0,
            n_intervals: 270,
            i_max: objective.i_max,
            s_star_target: objective.s_star_target,
            terminal_tol: 1e-3,
            penalty_schedule: vec![1e3, 1e4, 1e5, 1e6],
            max_outer_iters: 12,
            max_inner_iters: 300,
            dt: 0.05,
            verify_dt: DEFAULT_DT,
            report_horizon: 300.0,
            fd_step: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_horizon > 0.0) || !self.t_horizon.is_finite() {
            return Err(Error::InvalidParams(format!("t_horizon must be positive (got {})", self.t_horizon)));
        }
        if self.n_intervals == 0 {
            return Err(Error::InvalidParams("n_intervals must be at least 1".into()));
        }
        if !(self.terminal_tol > 0.0) {
            return Err(Error::InvalidParams("terminal_tol must be positive".into()));
        }
        if self.penalty_schedule.is_empty() || self.penalty_schedule.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidParams("penalty schedule must hold positive weights".into()));
        }
        if self.penalty_schedule.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParams("penalty schedule must be non-decreasing".into()));
        }
        if !(self.dt > 0.0 && self.verify_dt > 0.0 && self.fd_step > 0.0) {
            return Err(Error::InvalidParams("steps must be positive".into()));
        }
        EpidemiologicalObjective::new(self.s_star_target, self.i_max)?;
        Ok(())
    }

    fn objective(&self) -> EpidemiologicalObjective {
        EpidemiologicalObjective {
            s_star_target: self.s_star_target,
            i_max: self.i_max,
        }
    }
}

/// Weights of the unconstrained `∫ a_I I + a_R (r_bar - R) dt` objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedConfig {
    pub alpha_i: f64,
    pub alpha_r: f64,
    pub t_horizon: f64,
    pub n_intervals: usize,
    pub max_iters: usize,
    pub dt: f64,
    pub verify_dt: f64,
    pub report_horizon: f64,
    pub fd_step: f64,
}

impl WeightedConfig {
    pub fn new(alpha_i: f64, alpha_r: f64) -> Self {
        Self {
            alpha_i,
            alpha_r,
            t_horizon: 270.0,
            n_intervals: 270,
            max_iters: 500,
            dt: 0.05,
            verify_dt: DEFAULT_DT,
            report_horizon: 300.0,
            fd_step: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_i >= 0.0 && self.alpha_r >= 0.0) || !self.alpha_i.is_finite() || !self.alpha_r.is_finite() {
            return Err(Error::InvalidParams("weights must be finite and non-negative".into()));
        }
        if !(self.t_horizon > 0.0) || self.n_intervals == 0 {
            return Err(Error::InvalidParams("horizon and interval count must be positive".into()));
        }
        if !(self.dt > 0.0 && self.verify_dt > 0.0 && self.fd_step > 0.0) {
            return Err(Error::InvalidParams("steps must be positive".into()));
        }
        Ok(())
    }
}

/// Finite level set held for at least `dwell_min` days at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedConfig {
    /// Admissible reproduction numbers, ascending.
    pub levels: Vec<f64>,
    /// Slot length, days. The last slot is shorter when `T` is not a multiple.
    pub dwell_min: f64,
    pub t_horizon: f64,
    pub beam_width: usize,
    /// Accepted `|S(T) - S*|`.
    pub terminal_tol: f64,
    /// Also demand `I(T)` below the quasi-steady-state threshold.
    pub require_qss: bool,
    pub dt: f64,
    pub verify_dt: f64,
    pub report_horizon: f64,
}

impl QuantizedConfig {
    pub fn new(levels: Vec<f64>, dwell_min: f64, t_horizon: f64) -> Self {
        Self {
            levels,
            dwell_min,
            t_horizon,
            beam_width: 512,
            terminal_tol: 1e-3,
            require_qss: false,
            dt: 0.05,
            verify_dt: DEFAULT_DT,
            report_horizon: 300.0,
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidParams("at least one level is required".into()));
        }
        if self.levels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("levels must be strictly increasing".into()));
        }
        for &r in &self.levels {
            if r < params.r_min - 1e-9 || r > params.r_bar + 1e-9 {
                return Err(Error::InvalidParams(format!(
                    "level {r} outside [{}, {}]",
                    params.r_min, params.r_bar
                )));
            }
        }
        if !(self.dwell_min > 0.0) || !(self.t_horizon > 0.0) {
            return Err(Error::InvalidParams("dwell_min and t_horizon must be positive".into()));
        }
        if self.beam_width == 0 {
            return Err(Error::InvalidParams("beam_width must be at least 1".into()));
        }
        if !(self.terminal_tol > 0.0 && self.dt > 0.0 && self.verify_dt > 0.0) {
            return Err(Error::InvalidParams("tolerances and steps must be positive".into()));
        }
        Ok(())
    }

    /// Slot boundaries `0 = t_0 < t_1 < ... < t_n = T`.
    pub fn slot_edges(&self) -> Vec<f64> {
        let mut edges = vec![0.0];
        let mut k = 1usize;
        loop {
            let t = k as f64 * self.dwell_min;
            if t >= self.t_horizon - 1e-9 {
                edges.push(self.t_horizon);
                break;
            }
            edges.push(t);
            k += 1;
        }
        edges
    }
}

/// Dense-grid rollout of a piecewise-constant control on uniform intervals.
struct Grid {
    params: ModelParams,
    x0: (f64, f64),
    len: f64,
    n: usize,
    steps_per: usize,
    h: f64,
}

impl Grid {
    fn new(params: &ModelParams, t_horizon: f64, n: usize, dt: f64) -> Self {
        let len = t_horizon / n as f64;
        let steps_per = (len / dt).ceil().max(1.0) as usize;
        let x0 = params.initial_state();
        Self {
            params: *params,
            x0: (x0.s, x0.i),
            len,
            n,
            steps_per,
            h: len / steps_per as f64,
        }
    }

    /// Integrates interval `k` with value `r`, calling `visit(j, s, i)` after
    /// each step with the global step index `j`.
    #[inline]
    fn interval<F: FnMut(usize, f64, f64)>(&self, k: usize, r: f64, x: (f64, f64), mut visit: F) -> (f64, f64) {
        let law = ControlLaw::Constant(r);
        let (mut s, mut i) = x;
        let base = k * self.steps_per;
        for m in 0..self.steps_per {
            (s, i) = rk4_step(s, i, law, &self.params, self.h);
            visit(base + m, s, i);
        }
        (s, i)
    }

    fn sdi(&self, u: &[f64]) -> f64 {
        u.iter().map(|&r| (self.params.r_bar - r) * self.len).sum()
    }

    fn project(&self, u: &mut [f64]) {
        for r in u.iter_mut() {
            *r = r.clamp(self.params.r_min, self.params.r_bar);
        }
    }

    fn schedule(&self, u: &[f64]) -> Result<ControlSchedule> {
        ControlSchedule::new(
            u.iter()
                .enumerate()
                .map(|(k, &r)| Segment {
                    start: k as f64 * self.len,
                    end: if k + 1 == self.n { self.len * self.n as f64 } else { (k + 1) as f64 * self.len },
                    law: ControlLaw::Constant(r.clamp(self.params.r_min, self.params.r_bar)),
                })
                .collect(),
        )
    }
}

/// Objective evaluated by rollout; separable into per-step and terminal parts
/// so finite differences can restart from the perturbed interval.
trait Merit {
    fn grid(&self) -> &Grid;
    /// Contribution of the state after global step `j`.
    fn step_cost(&self, j: usize, s: f64, i: f64) -> f64;
    fn terminal_cost(&self, s: f64, i: f64) -> f64;
    /// Linear cost of the control values.
    fn control_cost(&self, u: &[f64]) -> f64;

    fn eval(&self, u: &[f64]) -> f64 {
        let g = self.grid();
        let mut acc = 0.0;
        let mut x = g.x0;
        for (k, &r) in u.iter().enumerate() {
            x = g.interval(k, r, x, |j, s, i| acc += self.step_cost(j, s, i));
        }
        acc + self.terminal_cost(x.0, x.1) + self.control_cost(u)
    }

    /// Merit and its central finite-difference gradient. Each perturbed
    /// rollout restarts from the checkpoint at the start of its interval.
    fn eval_grad(&self, u: &[f64], fd: f64) -> (f64, Vec<f64>) {
        let g = self.grid();
        let n = u.len();
        let mut checkpoints = Vec::with_capacity(n);
        let mut prefix = Vec::with_capacity(n);
        let mut acc = 0.0;
        let mut x = g.x0;
        for (k, &r) in u.iter().enumerate() {
            checkpoints.push(x);
            prefix.push(acc);
            x = g.interval(k, r, x, |j, s, i| acc += self.step_cost(j, s, i));
        }
        let merit = acc + self.terminal_cost(x.0, x.1) + self.control_cost(u);

        let mut work = u.to_vec();
        let mut grad = vec![0.0; n];
        for k in 0..n {
            let side = |delta: f64, work: &mut Vec<f64>| {
                work[k] = u[k] + delta;
                let mut acc = prefix[k];
                let mut x = checkpoints[k];
                for (m, &r) in work.iter().enumerate().skip(k) {
                    x = g.interval(m, r, x, |j, s, i| acc += self.step_cost(j, s, i));
                }
                acc + self.terminal_cost(x.0, x.1) + self.control_cost(work)
            };
            let plus = side(fd, &mut work);
            let minus = side(-fd, &mut work);
            work[k] = u[k];
            grad[k] = (plus - minus) / (2.0 * fd);
        }
        (merit, grad)
    }
}

/// Augmented Lagrangian of the constrained problem.
struct ConstrainedMerit<'a> {
    grid: &'a Grid,
    i_max: f64,
    s_target: f64,
    mu: f64,
    peak_mult: Vec<f64>,
    term_mult: f64,
}

impl Merit for ConstrainedMerit<'_> {
    fn grid(&self) -> &Grid {
        self.grid
    }

    #[inline]
    fn step_cost(&self, j: usize, _s: f64, i: f64) -> f64 {
        let shifted = (i - self.i_max + self.peak_mult[j] / self.mu).max(0.0);
        let base = self.peak_mult[j] / self.mu;
        0.5 * self.mu * (shifted * shifted - base * base) * self.grid.h
    }

    fn terminal_cost(&self, s: f64, _i: f64) -> f64 {
        let h = s - self.s_target;
        self.term_mult * h + 0.5 * self.mu * h * h
    }

    fn control_cost(&self, u: &[f64]) -> f64 {
        self.grid.sdi(u)
    }
}

struct WeightedMerit<'a> {
    grid: &'a Grid,
    alpha_i: f64,
    alpha_r: f64,
}

impl Merit for WeightedMerit<'_> {
    fn grid(&self) -> &Grid {
        self.grid
    }

    #[inline]
    fn step_cost(&self, _j: usize, _s: f64, i: f64) -> f64 {
        // Right-endpoint rule; I(0) contributes a constant.
        self.alpha_i * i * self.grid.h
    }

    fn terminal_cost(&self, _s: f64, _i: f64) -> f64 {
        0.0
    }

    fn control_cost(&self, u: &[f64]) -> f64 {
        self.alpha_r * self.grid.sdi(u)
    }
}

/// Box-constrained spectral projected gradient with a non-monotone Armijo
/// search. Returns the number of iterations performed.
fn projected_descent<M: Merit>(merit: &M, u: &mut Vec<f64>, max_iters: usize, fd: f64) -> usize {
    const MEMORY: usize = 8;
    const ARMIJO: f64 = 1e-4;
    let grid = merit.grid();
    let (lo, hi) = (grid.params.r_min, grid.params.r_bar);
    let (mut f, mut g) = merit.eval_grad(u, fd);
    let mut history = vec![f];
    let mut alpha = 1.0 / g.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    let mut iters = 0;
    while iters < max_iters {
        iters += 1;
        let pg_norm = u
            .iter()
            .zip(&g)
            .map(|(&x, &d)| ((x - d).clamp(lo, hi) - x).abs())
            .fold(0.0, f64::max);
        if pg_norm < 1e-9 {
            break;
        }
        let dir: Vec<f64> = u
            .iter()
            .zip(&g)
            .map(|(&x, &d)| (x - alpha * d).clamp(lo, hi) - x)
            .collect();
        let slope: f64 = dir.iter().zip(&g).map(|(d, gr)| d * gr).sum();
        if slope >= 0.0 {
            break;
        }
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut t = 1.0;
        let mut trial: Vec<f64>;
        let mut f_trial;
        loop {
            trial = u.iter().zip(&dir).map(|(&x, &d)| x + t * d).collect();
            grid.project(&mut trial);
            f_trial = merit.eval(&trial);
            if f_trial <= reference + ARMIJO * t * slope || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        if t < 1e-10 && f_trial > reference {
            break;
        }
        let (f_new, g_new) = merit.eval_grad(&trial, fd);
        let step: Vec<f64> = trial.iter().zip(u.iter()).map(|(a, b)| a - b).collect();
        let ss: f64 = step.iter().map(|v| v * v).sum();
        let sy: f64 = step.iter().zip(g_new.iter().zip(&g)).map(|(s, (a, b))| s * (a - b)).sum();
        alpha = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { 1e10 };
        let improvement = f - f_new;
        *u = trial;
        f = f_new;
        g = g_new;
        history.push(f);
        if history.len() > MEMORY {
            history.remove(0);
        }
        if improvement.abs() < 1e-12 * (1.0 + f.abs()) && ss < 1e-20 {
            break;
        }
    }
    iters
}

/// Constraint residuals of `u` on the optimizer grid: (peak excess, terminal gap).
fn residuals(grid: &Grid, u: &[f64], i_max: f64, s_target: f64) -> (f64, f64, Vec<f64>) {
    let mut excess = vec![0.0; grid.n * grid.steps_per];
    let mut x = grid.x0;
    for (k, &r) in u.iter().enumerate() {
        x = grid.interval(k, r, x, |j, _s, i| excess[j] = i - i_max);
    }
    let peak = excess.iter().copied().fold(0.0, f64::max);
    (peak, (x.0 - s_target).abs(), excess)
}

/// Averages a report's `R(t)` over each control interval.
fn project_schedule(report: &StrategyReport, grid: &Grid) -> Vec<f64> {
    let r_bar = grid.params.r_bar;
    let mut acc = vec![0.0; grid.n];
    let samples = &report.trajectory.samples;
    for w in samples.windows(2) {
        let (a, b) = (w[0].t, w[1].t);
        let mut t = a;
        while t < b - 1e-12 {
            let k = ((t / grid.len + 1e-9).floor() as usize).min(grid.n);
            if k >= grid.n {
                break;
            }
            let edge = ((k + 1) as f64 * grid.len).min(b);
            acc[k] += (r_bar - w[0].r) * (edge - t);
            t = edge;
        }
    }
    let mut u: Vec<f64> = acc.iter().map(|d| r_bar - d / grid.len).collect();
    grid.project(&mut u);
    u
}

/// Simulates `u` at the verification step and builds the report.
fn report_for(
    name: &str,
    params: &ModelParams,
    objective: &EpidemiologicalObjective,
    grid: &Grid,
    u: &[f64],
    verify_dt: f64,
    report_horizon: f64,
) -> Result<StrategyReport> {
    let schedule = compact(grid.schedule(u)?, params.r_bar)?;
    evaluate_schedule(
        name,
        params,
        objective,
        schedule,
        params.initial_state(),
        report_horizon.max(grid.len * grid.n as f64),
        verify_dt,
    )
}

/// Merges adjacent equal constant segments and drops trailing/leading
/// segments that equal `r_bar`.
fn compact(schedule: ControlSchedule, r_bar: f64) -> Result<ControlSchedule> {
    let mut out: Vec<Segment> = Vec::new();
    for seg in schedule.segments() {
        if let ControlLaw::Constant(r) = seg.law {
            if r >= r_bar {
                continue;
            }
        }
        match out.last_mut() {
            Some(last) if last.law == seg.law && (last.end - seg.start).abs() < 1e-12 => last.end = seg.end,
            _ => out.push(*seg),
        }
    }
    ControlSchedule::new(out)
}

fn state_at_t(params: &ModelParams, schedule: &ControlSchedule, t: f64, dt: f64) -> Result<EpiState> {
    Ok(crate::model::simulate(params, schedule, params.initial_state(), t, dt)?.final_state())
}

/// Minimizes the SDI over `[0, T]` subject to the peak cap and the
/// terminal condition `S(T) = S*`.
pub fn solve_p_opt(params: &ModelParams, cfg: &OptConfig) -> Result<StrategyReport> {
    params.validate()?;
    cfg.validate()?;
    let objective = cfg.objective();
    let grid = Grid::new(params, cfg.t_horizon, cfg.n_intervals, cfg.dt);

    let open = vec![params.r_bar; cfg.n_intervals];
    let (peak0, term0, _) = residuals(&grid, &open, cfg.i_max, cfg.s_star_target);
    if peak0 <= 0.0 && term0 <= cfg.terminal_tol {
        let mut report = report_for("p_opt", params, &objective, &grid, &open, cfg.verify_dt, cfg.report_horizon)?;
        report.notes.push("open loop already satisfies the constraints".into());
        return finish_constrained(report, params, cfg, true);
    }

    let synth = SynthesisOptions {
        dt: cfg.verify_dt,
        horizon: cfg.report_horizon.max(cfg.t_horizon),
        intervention_end: cfg.t_horizon,
    };
    let warm = wms(params, &objective, &synth).map_err(|e| Error::NoFeasiblePoint(e.to_string()))?;
    let mut u = project_schedule(&warm, &grid);
    let warm_u = u.clone();

    let steps = grid.n * grid.steps_per;
    let mut merit = ConstrainedMerit {
        grid: &grid,
        i_max: cfg.i_max,
        s_target: cfg.s_star_target,
        mu: cfg.penalty_schedule[0],
        peak_mult: vec![0.0; steps],
        term_mult: 0.0,
    };

    // Candidates: the warm start plus the iterate after each outer pass.
    let mut candidates = vec![warm_u];
    let mut converged = false;
    let mut outer = 0;
    while outer < cfg.max_outer_iters {
        merit.mu = cfg.penalty_schedule[outer.min(cfg.penalty_schedule.len() - 1)];
        projected_descent(&merit, &mut u, cfg.max_inner_iters, cfg.fd_step);
        let (peak, term, excess) = residuals(&grid, &u, cfg.i_max, cfg.s_star_target);
        for (lam, g) in merit.peak_mult.iter_mut().zip(&excess) {
            *lam = (*lam + merit.mu * g).max(0.0);
        }
        let x_t = state_at_grid_end(&grid, &u);
        merit.term_mult += merit.mu * (x_t - cfg.s_star_target);
        candidates.push(u.clone());
        outer += 1;
        if peak < 0.5 * cfg.terminal_tol && term < 0.5 * cfg.terminal_tol {
            converged = true;
            break;
        }
    }

    // Verify every candidate at the fine step and keep the cheapest one that
    // satisfies the constraints; fall back to the last iterate.
    let mut best: Option<StrategyReport> = None;
    for cand in candidates.iter().rev() {
        let rep = report_for("p_opt", params, &objective, &grid, cand, cfg.verify_dt, cfg.report_horizon)?;
        let ok = constraints_hold(&rep, params, cfg)?;
        if ok && best.as_ref().map_or(true, |b| rep.sdi < b.sdi) {
            best = Some(rep);
        }
    }
    let mut report = match best {
        Some(r) => r,
        None => report_for("p_opt", params, &objective, &grid, &u, cfg.verify_dt, cfg.report_horizon)?,
    };
    report.values.push(("sdi_warm_start".into(), warm.sdi));
    report.values.push(("outer_iterations".into(), outer as f64));
    if !converged {
        report.notes.push("not converged".into());
    }
    let ok = constraints_hold(&report, params, cfg)?;
    finish_constrained(report, params, cfg, ok)
}

fn state_at_grid_end(grid: &Grid, u: &[f64]) -> f64 {
    let mut x = grid.x0;
    for (k, &r) in u.iter().enumerate() {
        x = grid.interval(k, r, x, |_, _, _| {});
    }
    x.0
}

fn constraints_hold(report: &StrategyReport, params: &ModelParams, cfg: &OptConfig) -> Result<bool> {
    let s_t = state_at_t(params, &report.schedule, cfg.t_horizon, cfg.verify_dt)?.s;
    let peak = max_i_until(report, cfg.t_horizon);
    Ok(peak <= cfg.i_max + PEAK_TOL && (s_t - cfg.s_star_target).abs() <= cfg.terminal_tol)
}

fn max_i_until(report: &StrategyReport, t: f64) -> f64 {
    report
        .trajectory
        .samples
        .iter()
        .take_while(|p| p.t <= t + 1e-9)
        .map(|p| p.i)
        .fold(0.0, f64::max)
}

fn finish_constrained(mut report: StrategyReport, params: &ModelParams, cfg: &OptConfig, ok: bool) -> Result<StrategyReport> {
    let s_t = state_at_t(params, &report.schedule, cfg.t_horizon, cfg.verify_dt)?;
    report.timings.retain(|(k, _)| k != "tau_f");
    report.timings.push(("T".into(), cfg.t_horizon));
    report.values.push(("s_at_T".into(), s_t.s));
    report.values.push(("i_at_T".into(), s_t.i));
    report.values.push(("peak_until_T".into(), max_i_until(&report, cfg.t_horizon)));
    report.feasible = ok;
    Ok(report)
}

/// Minimizes `∫_0^T a_I I + a_R (r_bar - R) dt` with no epidemiological
/// constraints.
pub fn solve_weighted(
    params: &ModelParams,
    objective: &EpidemiologicalObjective,
    cfg: &WeightedConfig,
) -> Result<StrategyReport> {
    params.validate()?;
    cfg.validate()?;
    let grid = Grid::new(params, cfg.t_horizon, cfg.n_intervals, cfg.dt);
    let synth = SynthesisOptions {
        dt: cfg.verify_dt,
        horizon: cfg.report_horizon.max(cfg.t_horizon),
        intervention_end: cfg.t_horizon,
    };
    let mut u = match wms(params, objective, &synth) {
        Ok(warm) => project_schedule(&warm, &grid),
        Err(_) => vec![params.r_bar; cfg.n_intervals],
    };
    let merit = WeightedMerit {
        grid: &grid,
        alpha_i: cfg.alpha_i,
        alpha_r: cfg.alpha_r,
    };
    let iters = projected_descent(&merit, &mut u, cfg.max_iters, cfg.fd_step);
    let value = merit.eval(&u);
    let mut report = report_for("weighted", params, objective, &grid, &u, cfg.verify_dt, cfg.report_horizon)?;
    report.values.push(("weighted_objective".into(), value));
    report.values.push(("iterations".into(), iters as f64));
    if iters >= cfg.max_iters {
        report.notes.push("not converged".into());
    }
    report.timings.retain(|(k, _)| k != "tau_f");
    report.timings.push(("T".into(), cfg.t_horizon));
    Ok(report)
}

#[derive(Debug, Clone, Copy)]
struct Score {
    sdi: f64,
    efs: f64,
}

impl Score {
    /// SDI values within `1e-9` count as equal and defer to the final size.
    fn better_than(&self, other: &Score) -> bool {
        if (self.sdi - other.sdi).abs() > 1e-9 {
            self.sdi < other.sdi
        } else {
            self.efs < other.efs - 1e-12
        }
    }
}

#[derive(Clone)]
struct BeamNode {
    s: f64,
    i: f64,
    sdi: f64,
    path: Vec<u8>,
}

/// Integrates one slot, returning the end state and the largest `I` seen.
fn run_slot(params: &ModelParams, r: f64, x: (f64, f64), len: f64, dt: f64) -> ((f64, f64), f64) {
    let law = ControlLaw::Constant(r);
    let steps = (len / dt).ceil().max(1.0) as usize;
    let h = len / steps as f64;
    let (mut s, mut i) = x;
    let mut peak = i;
    for _ in 0..steps {
        (s, i) = rk4_step(s, i, law, params, h);
        peak = peak.max(i);
    }
    ((s, i), peak)
}

struct QuantizedEval<'a> {
    params: &'a ModelParams,
    cfg: &'a QuantizedConfig,
    objective: &'a EpidemiologicalObjective,
    lens: Vec<f64>,
}

impl QuantizedEval<'_> {
    fn terminal_ok(&self, s: f64, i: f64) -> bool {
        (s - self.objective.s_star_target).abs() <= self.cfg.terminal_tol && (!self.cfg.require_qss || i < QSS_THRESHOLD)
    }

    /// True when no continuation from `(s, i)` at time `t` can meet the
    /// terminal conditions: either `I` cannot decay below the QSS threshold
    /// even under `r_min`, or `S` cannot fall into the terminal band even
    /// under `r_bar`.
    fn doomed(&self, s: f64, i: f64, t: f64) -> bool {
        let remaining = self.cfg.t_horizon - t;
        let gamma = self.params.gamma;
        if self.cfg.require_qss {
            let s_low = (self.objective.s_star_target - self.cfg.terminal_tol).max(0.0);
            let fastest = gamma * (1.0 - self.params.r_min * s_low);
            if i * (-fastest * remaining).exp() >= QSS_THRESHOLD {
                return true;
            }
        }
        let ((s_end, _), _) = run_slot(self.params, self.params.r_bar, (s, i), remaining, self.cfg.dt);
        s_end > self.objective.s_star_target + self.cfg.terminal_tol
    }

    fn score(&self, sdi: f64, s: f64, i: f64) -> Score {
        let efs = s_infinity(self.params.r_bar, s.clamp(0.0, 1.0), i.max(0.0)).map_or(1.0, |f| f.efs);
        Score { sdi, efs }
    }

    /// Score of a complete path, or `None` when it violates a constraint.
    fn evaluate(&self, path: &[u8]) -> Option<Score> {
        let mut x = (self.params.initial_state().s, self.params.initial_state().i);
        let mut sdi = 0.0;
        for (&lvl, &len) in path.iter().zip(&self.lens) {
            let r = self.cfg.levels[lvl as usize];
            let (next, peak) = run_slot(self.params, r, x, len, self.cfg.dt);
            if peak > self.objective.i_max {
                return None;
            }
            sdi += (self.params.r_bar - r) * len;
            x = next;
        }
        self.terminal_ok(x.0, x.1).then(|| self.score(sdi, x.0, x.1))
    }

    fn schedule(&self, path: &[u8]) -> Result<ControlSchedule> {
        let edges = self.cfg.slot_edges();
        let segs = path
            .iter()
            .enumerate()
            .map(|(k, &lvl)| Segment {
                start: edges[k],
                end: edges[k + 1],
                law: ControlLaw::Constant(self.cfg.levels[lvl as usize]),
            })
            .collect();
        compact(ControlSchedule::new(segs)?, self.params.r_bar)
    }
}

/// Beam search over one level per dwell slot, then first-improvement
/// single-slot swaps. Nodes whose peak exceeds the cap, whose `S` has
/// fallen below the terminal band, or from which even `r_min` held forever
/// cannot contain the peak are pruned. Ties break towards lower level
/// indices.
pub fn solve_quantized(
    params: &ModelParams,
    cfg: &QuantizedConfig,
    objective: &EpidemiologicalObjective,
) -> Result<StrategyReport> {
    params.validate()?;
    cfg.validate(params)?;
    let edges = cfg.slot_edges();
    let lens: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    let n_slots = lens.len();
    let eval = QuantizedEval {
        params,
        cfg,
        objective,
        lens: lens.clone(),
    };
    let s_floor = objective.s_star_target - cfg.terminal_tol;
    let x0 = params.initial_state();
    let mut beam = vec![BeamNode {
        s: x0.s,
        i: x0.i,
        sdi: 0.0,
        path: Vec::with_capacity(n_slots),
    }];

    for (slot, &len) in lens.iter().enumerate() {
        let last = slot + 1 == n_slots;
        let mut next: Vec<BeamNode> = Vec::with_capacity(beam.len() * cfg.levels.len());
        for node in &beam {
            for (li, &r) in cfg.levels.iter().enumerate() {
                let ((s, i), peak) = run_slot(params, r, (node.s, node.i), len, cfg.dt);
                if peak > objective.i_max || s < s_floor {
                    continue;
                }
                if peak_prevalence(params.r_min, s.clamp(0.0, 1.0), i.max(0.0)).map_or(true, |p| p > objective.i_max) {
                    continue;
                }
                if last && !eval.terminal_ok(s, i) {
                    continue;
                }
                if !last && eval.doomed(s, i, edges[slot + 1]) {
                    continue;
                }
                let mut path = node.path.clone();
                path.push(li as u8);
                next.push(BeamNode {
                    s,
                    i,
                    sdi: node.sdi + (params.r_bar - r) * len,
                    path,
                });
            }
        }
        // Collapse states within about 1e-3 in S and 2% in I, keeping the cheapest.
        let mut buckets: HashMap<(i64, i64), usize> = HashMap::new();
        let mut kept: Vec<BeamNode> = Vec::with_capacity(next.len());
        next.sort_by(|a, b| a.sdi.total_cmp(&b.sdi).then_with(|| a.path.cmp(&b.path)));
        for node in next {
            let key = ((node.s * 1e3).round() as i64, (node.i.max(1e-300).ln() * 50.0).round() as i64);
            if buckets.contains_key(&key) {
                continue;
            }
            buckets.insert(key, kept.len());
            kept.push(node);
        }
        kept.truncate(cfg.beam_width);
        beam = kept;
        if beam.is_empty() {
            return Err(Error::Infeasible(format!(
                "beam exhausted at slot {slot} (t = {} d) with no admissible schedule",
                edges[slot]
            )));
        }
    }

    // Minimal SDI first; among equal-SDI schedules the smaller final size wins.
    let mut best: Option<(Vec<u8>, Score)> = None;
    for node in &beam {
        let score = eval.score(node.sdi, node.s, node.i);
        if best.as_ref().map_or(true, |(_, b)| score.better_than(b)) {
            best = Some((node.path.clone(), score));
        }
    }
    let (mut path, mut score) = best.expect("beam is non-empty");
    let beam_sdi = score.sdi;

    // First-improvement local search over single-slot level swaps.
    let mut improved = true;
    while improved {
        improved = false;
        'outer: for slot in 0..n_slots {
            for li in 0..cfg.levels.len() as u8 {
                if li == path[slot] {
                    continue;
                }
                let mut cand = path.clone();
                cand[slot] = li;
                if let Some(s) = eval.evaluate(&cand) {
                    if s.better_than(&score) {
                        path = cand;
                        score = s;
                        improved = true;
                        break 'outer;
                    }
                }
            }
        }
    }

    let schedule = eval.schedule(&path)?;
    let mut report = evaluate_schedule(
        "quantized",
        params,
        objective,
        schedule,
        params.initial_state(),
        cfg.report_horizon.max(cfg.t_horizon),
        cfg.verify_dt,
    )?;
    let s_t = state_at_t(params, &report.schedule, cfg.t_horizon, cfg.verify_dt)?;
    let peak = max_i_until(&report, cfg.t_horizon);
    report.feasible = peak <= objective.i_max + PEAK_TOL && (s_t.s - objective.s_star_target).abs() <= cfg.terminal_tol;
    report.timings.retain(|(k, _)| k != "tau_f");
    report.timings.push(("T".into(), cfg.t_horizon));
    report.values.push(("s_at_T".into(), s_t.s));
    report.values.push(("i_at_T".into(), s_t.i));
    report.values.push(("peak_until_T".into(), peak));
    report.values.push(("sdi_beam".into(), beam_sdi));
    let levels: Vec<String> = path.iter().map(|&l| cfg.levels[l as usize].to_string()).collect();
    report.notes.push(format!("levels per slot: {}", levels.join(" ")));
    Ok(report)
}
