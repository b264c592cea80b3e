//! Controlled SIR model: state, parameters, control schedules and a
//! fixed-step RK4 integrator with event localization.
//!
//! Time is measured in days. The dimensionless time `tau = gamma * t` is
//! stored alongside every sample so results can be compared in either unit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default integration step in days.
pub const DEFAULT_DT: f64 = 0.01;
/// Events are bracketed by bisection to this width (days).
pub const EVENT_TOL: f64 = 1e-6;
/// Tolerance used when checking the simplex constraints of a state.
const STATE_SLACK: f64 = 1e-12;
/// Constant laws may sit this far outside `[r_min, r_bar]` (rounding).
const BOUND_SLACK: f64 = 1e-9;

/// Point `(S, I)` of the constraint set: both in `[0, 1]`, `S + I <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpiState {
    pub s: f64,
    pub i: f64,
}

impl EpiState {
    pub fn new(s: f64, i: f64) -> Result<Self> {
        let state = Self { s, i };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { s, i } = *self;
        if !s.is_finite() || !i.is_finite() {
            return Err(Error::Domain(format!("non-finite state ({s}, {i})")));
        }
        if s < -STATE_SLACK || s > 1.0 + STATE_SLACK {
            return Err(Error::Domain(format!("S = {s} outside [0, 1]")));
        }
        if i < -STATE_SLACK || i > 1.0 + STATE_SLACK {
            return Err(Error::Domain(format!("I = {i} outside [0, 1]")));
        }
        if s + i > 1.0 + STATE_SLACK {
            return Err(Error::Domain(format!("S + I = {} exceeds 1", s + i)));
        }
        Ok(())
    }

    /// Removed fraction `1 - S - I`.
    pub fn removed(&self) -> f64 {
        1.0 - self.s - self.i
    }
}

/// Reproduction-number bounds, removal rate and initial infected fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Reproduction number without intervention.
    pub r_bar: f64,
    /// Smallest reproduction number an intervention can achieve.
    pub r_min: f64,
    /// Removal rate, 1/day.
    pub gamma: f64,
    /// Initial infected fraction; the outbreak starts at `(1 - epsilon, epsilon)`.
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(r_bar: f64, r_min: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        let params = Self {
            r_bar,
            r_min,
            gamma,
            epsilon,
        };
        params.validate()?;
        Ok(params)
    }

    /// `R_bar = 2.9`, `R_min = 0.66`, `gamma = 0.1/day`, `epsilon = 1.49e-5`.
    pub fn benchmark() -> Self {
        Self {
            r_bar: 2.9,
            r_min: 0.66,
            gamma: 0.1,
            epsilon: 1.49e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.r_bar, self.r_min, self.gamma, self.epsilon]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if !(self.r_min > 0.0) {
            return Err(Error::InvalidParams(format!(
                "r_min must be positive (got {})",
                self.r_min
            )));
        }
        if !(self.r_min < self.r_bar) {
            return Err(Error::InvalidParams(format!(
                "r_min < r_bar violated (r_min = {}, r_bar = {})",
                self.r_min, self.r_bar
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParams(format!(
                "gamma must be positive (got {})",
                self.gamma
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon must lie in (0, 1) (got {})",
                self.epsilon
            )));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> EpiState {
        EpiState {
            s: 1.0 - self.epsilon,
            i: self.epsilon,
        }
    }

    pub fn clamp_r(&self, r: f64) -> f64 {
        if r.is_nan() {
            return self.r_bar;
        }
        r.clamp(self.r_min, self.r_bar)
    }
}

/// How the reproduction number is chosen inside a schedule segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlLaw {
    /// Fixed value of `R`.
    Constant(f64),
    /// `R(t) = 1 / S(t)`, clamped into `[r_min, r_bar]`; holds `I` constant.
    InverseSusceptible,
}

impl ControlLaw {
    #[inline]
    pub fn value(&self, s: f64, params: &ModelParams) -> f64 {
        match *self {
            ControlLaw::Constant(r) => r,
            ControlLaw::InverseSusceptible => params.clamp_r(1.0 / s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub law: ControlLaw,
}

/// Piecewise description of `R(t)`; `r_bar` applies outside every segment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlSchedule {
    segments: Vec<Segment>,
}

impl ControlSchedule {
    /// No intervention at all.
    pub fn open_loop() -> Self {
        Self::default()
    }

    /// Builds a schedule, checking that segments are finite, ordered and
    /// non-overlapping.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let mut prev_end = 0.0;
        for (k, seg) in segments.iter().enumerate() {
            if !seg.start.is_finite() || !seg.end.is_finite() {
                return Err(Error::InvalidSchedule(format!(
                    "segment {k} has a non-finite bound"
                )));
            }
            if seg.start < 0.0 {
                return Err(Error::InvalidSchedule(format!(
                    "segment {k} starts before t = 0"
                )));
            }
            if !(seg.end > seg.start) {
                return Err(Error::InvalidSchedule(format!(
                    "segment {k} is empty or reversed ({} .. {})",
                    seg.start, seg.end
                )));
            }
            if seg.start < prev_end {
                return Err(Error::InvalidSchedule(format!(
                    "segment {k} overlaps or precedes the previous segment"
                )));
            }
            if let ControlLaw::Constant(r) = seg.law {
                if !r.is_finite() {
                    return Err(Error::InvalidSchedule(format!(
                        "segment {k} has a non-finite value"
                    )));
                }
            }
            prev_end = seg.end;
        }
        Ok(Self { segments })
    }

    /// Constant `r` on `[start, end]`, `r_bar` elsewhere.
    pub fn single_interval(start: f64, end: f64, r: f64) -> Result<Self> {
        Self::new(vec![Segment {
            start,
            end,
            law: ControlLaw::Constant(r),
        }])
    }

    /// Piecewise-constant values on consecutive intervals of equal length
    /// starting at t = 0.
    pub fn piecewise_constant(values: &[f64], interval: f64) -> Result<Self> {
        let segments = values
            .iter()
            .enumerate()
            .map(|(k, &r)| Segment {
                start: k as f64 * interval,
                end: (k + 1) as f64 * interval,
                law: ControlLaw::Constant(r),
            })
            .collect();
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_open_loop(&self) -> bool {
        self.segments.is_empty()
    }

    /// End of the last segment, i.e. the end of the intervention.
    pub fn end_time(&self) -> Option<f64> {
        self.segments.last().map(|s| s.end)
    }

    /// Checks that every constant value lies in `[r_min, r_bar]`.
    pub fn validate_for(&self, params: &ModelParams) -> Result<()> {
        for (k, seg) in self.segments.iter().enumerate() {
            if let ControlLaw::Constant(r) = seg.law {
                if r < params.r_min - BOUND_SLACK || r > params.r_bar + BOUND_SLACK {
                    return Err(Error::InvalidSchedule(format!(
                        "segment {k} value {r} outside [{}, {}]",
                        params.r_min, params.r_bar
                    )));
                }
            }
        }
        Ok(())
    }

    /// Law in effect at time `t` (segments are closed on the left, open on
    /// the right). `None` means open loop.
    pub fn law_at(&self, t: f64) -> Option<ControlLaw> {
        self.segments
            .iter()
            .find(|seg| seg.start <= t && t < seg.end)
            .map(|seg| seg.law)
    }

    /// Splits `[0, t_end]` into maximal pieces with a single law.
    pub(crate) fn pieces(&self, t_end: f64, r_bar: f64) -> Vec<(f64, f64, ControlLaw)> {
        let open = ControlLaw::Constant(r_bar);
        let mut out = Vec::with_capacity(2 * self.segments.len() + 1);
        let mut t = 0.0;
        for seg in &self.segments {
            if t >= t_end {
                break;
            }
            if seg.start > t {
                let b = seg.start.min(t_end);
                out.push((t, b, open));
                t = b;
            }
            if t >= t_end {
                break;
            }
            let b = seg.end.min(t_end);
            if b > t {
                out.push((t, b, seg.law));
                t = b;
            }
        }
        if t < t_end {
            out.push((t, t_end, open));
        }
        if out.is_empty() {
            out.push((0.0, 0.0, open));
        }
        out
    }
}

/// Right-hand side of the controlled SIR model in day units:
/// `dS/dt = -gamma R S I`, `dI/dt = gamma R S I - gamma I`.
#[inline]
pub fn derivative(state: EpiState, r: f64, gamma: f64) -> (f64, f64) {
    rhs(state.s, state.i, r, gamma)
}

#[inline]
fn rhs(s: f64, i: f64, r: f64, gamma: f64) -> (f64, f64) {
    let infection = gamma * r * s * i;
    (-infection, infection - gamma * i)
}

/// One classic RK4 step of length `h`, evaluating the law at every stage.
#[inline]
pub(crate) fn rk4_step(s: f64, i: f64, law: ControlLaw, params: &ModelParams, h: f64) -> (f64, f64) {
    let g = params.gamma;
    let f = |s: f64, i: f64| rhs(s, i, law.value(s, params), g);
    let (k1s, k1i) = f(s, i);
    let (k2s, k2i) = f(s + 0.5 * h * k1s, i + 0.5 * h * k1i);
    let (k3s, k3i) = f(s + 0.5 * h * k2s, i + 0.5 * h * k2i);
    let (k4s, k4i) = f(s + h * k3s, i + h * k3i);
    (
        s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s),
        i + h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i),
    )
}

/// Grid of step end points inside `[a, b]`: multiples of `dt` plus `b`.
/// Grid points closer than `1e-9` day to `a` or `b` are dropped.
pub(crate) fn step_points(a: f64, b: f64, dt: f64) -> impl Iterator<Item = f64> {
    let first = (a / dt).floor() as i64 + 1;
    let last = (b / dt).ceil() as i64;
    (first..=last)
        .map(move |k| k as f64 * dt)
        .filter(move |&t| t > a + 1e-9 && t < b - 1e-9)
        .chain(std::iter::once(b))
        .filter(move |&t| t > a)
}

/// Crossing conditions that can be watched during a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Condition {
    /// `I` crosses `level` from below.
    IRisesTo(f64),
    /// `S` crosses `level` from above.
    SFallsTo(f64),
    /// `I` attains a local maximum.
    PeakI,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Condition::IRisesTo(c) => write!(f, "I rises to {c}"),
            Condition::SFallsTo(c) => write!(f, "S falls to {c}"),
            Condition::PeakI => write!(f, "peak of I"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: Condition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Days.
    pub t: f64,
    /// Dimensionless time `gamma * t`.
    pub tau: f64,
    pub s: f64,
    pub i: f64,
    /// Reproduction number in effect from this sample on.
    pub r: f64,
}

impl Sample {
    pub fn state(&self) -> EpiState {
        EpiState {
            s: self.s,
            i: self.i,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    /// Indices of samples that start a new schedule piece.
    pub boundaries: Vec<usize>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }

    pub fn final_state(&self) -> EpiState {
        self.last().state()
    }

    /// Largest sampled `I`.
    pub fn max_i(&self) -> f64 {
        self.samples.iter().map(|p| p.i).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax_i(&self) -> &Sample {
        self.samples
            .iter()
            .fold(&self.samples[0], |best, p| if p.i > best.i { p } else { best })
    }

    pub fn first_event(&self, kind: Condition) -> Option<f64> {
        self.events.iter().find(|e| e.kind == kind).map(|e| e.t)
    }

    /// Left Riemann sum of `r_bar - R` over the sample grid, in R·day.
    /// Exact for piecewise-constant schedules because every schedule
    /// boundary is a grid point.
    pub fn distancing_integral(&self, r_bar: f64) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (r_bar - w[0].r) * (w[1].t - w[0].t))
            .sum()
    }
}

fn validate_run(params: &ModelParams, schedule: &ControlSchedule, x0: EpiState, t_end: f64, dt: f64) -> Result<()> {
    params.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("dt must be positive (got {dt})")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Domain(format!("t_end must be non-negative (got {t_end})")));
    }
    x0.validate()?;
    schedule.validate_for(params)
}

/// Integrates the model over `[0, t_end]` with fixed-step RK4, recording
/// every step and the local maxima of `I`.
pub fn simulate(
    params: &ModelParams,
    schedule: &ControlSchedule,
    x0: EpiState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    simulate_watching(params, schedule, x0, t_end, dt, &[Condition::PeakI])
}

/// Like [`simulate`], with an explicit list of conditions to localize.
pub fn simulate_watching(
    params: &ModelParams,
    schedule: &ControlSchedule,
    x0: EpiState,
    t_end: f64,
    dt: f64,
    watch: &[Condition],
) -> Result<Trajectory> {
    validate_run(params, schedule, x0, t_end, dt)?;
    let pieces = schedule.pieces(t_end, params.r_bar);
    let n_est = (t_end / dt).ceil() as usize + 2 * pieces.len() + 1;
    let mut samples = Vec::with_capacity(n_est);
    let mut events = Vec::new();
    let mut boundaries = Vec::with_capacity(pieces.len());
    let mut watchers: Vec<Watcher> = watch.iter().map(|&c| Watcher::new(c)).collect();

    let (mut s, mut i) = (x0.s, x0.i);
    let first_law = pieces[0].2;
    samples.push(Sample {
        t: 0.0,
        tau: 0.0,
        s,
        i,
        r: first_law.value(s, params),
    });

    for &(a, b, law) in &pieces {
        if b <= a {
            continue;
        }
        let idx = samples.len() - 1;
        boundaries.push(idx);
        samples[idx].r = law.value(s, params);
        let mut t = a;
        for t_next in step_points(a, b, dt) {
            let h = t_next - t;
            let (s1, i1) = rk4_step(s, i, law, params, h);
            for w in watchers.iter_mut() {
                if let Some(te) = w.check(params, law, t, h, (s, i), (s1, i1)) {
                    events.push(Event { t: te, kind: w.cond });
                }
            }
            s = s1;
            i = i1;
            t = t_next;
            samples.push(Sample {
                t,
                tau: params.gamma * t,
                s,
                i,
                r: law.value(s, params),
            });
        }
    }
    events.sort_by(|x, y| x.t.total_cmp(&y.t));
    Ok(Trajectory {
        samples,
        events,
        boundaries,
    })
}

/// First time at which `condition` holds, localized to [`EVENT_TOL`].
pub fn find_time(
    params: &ModelParams,
    schedule: &ControlSchedule,
    x0: EpiState,
    condition: Condition,
    horizon: f64,
    dt: f64,
) -> Result<f64> {
    let traj = simulate_watching(params, schedule, x0, horizon, dt, &[condition])?;
    traj.first_event(condition).ok_or(Error::NotReached {
        condition: condition.to_string(),
        horizon,
    })
}

/// State reached from `x` after a partial RK4 step of length `h` under `law`.
pub(crate) fn advance(params: &ModelParams, law: ControlLaw, x: (f64, f64), h: f64) -> (f64, f64) {
    if h <= 0.0 {
        return x;
    }
    rk4_step(x.0, x.1, law, params, h)
}

struct Watcher {
    cond: Condition,
    rising: bool,
}

impl Watcher {
    fn new(cond: Condition) -> Self {
        Self { cond, rising: false }
    }

    fn check(
        &mut self,
        params: &ModelParams,
        law: ControlLaw,
        t0: f64,
        h: f64,
        x0: (f64, f64),
        x1: (f64, f64),
    ) -> Option<f64> {
        match self.cond {
            Condition::IRisesTo(c) => {
                if x0.1 < c && x1.1 >= c {
                    Some(bisect_step(params, law, t0, h, x0, |x| x.1 - c))
                } else {
                    None
                }
            }
            Condition::SFallsTo(c) => {
                if x0.0 > c && x1.0 <= c {
                    Some(bisect_step(params, law, t0, h, x0, |x| c - x.0))
                } else {
                    None
                }
            }
            Condition::PeakI => {
                let growth = |x: (f64, f64)| {
                    let r = law.value(x.0, params);
                    rhs(x.0, x.1, r, params.gamma).1
                };
                let thr = |x: (f64, f64)| 1e-10 * params.gamma * x.1.abs() + 1e-300;
                let d0 = growth(x0);
                let d1 = growth(x1);
                let mut event = None;
                if self.rising && d0 < -thr(x0) {
                    // The law switched at t0 and turned growth into decay.
                    event = Some(t0);
                    self.rising = false;
                } else if self.rising && d1 < -thr(x1) || (d0 > thr(x0) && d1 < -thr(x1)) {
                    event = Some(bisect_step(params, law, t0, h, x0, |x| -growth(x)));
                    self.rising = false;
                }
                if d1 > thr(x1) {
                    self.rising = true;
                } else if d1 < -thr(x1) {
                    self.rising = false;
                }
                event
            }
        }
    }
}

/// Bisects a sign change of `g` (negative at the step start, non-negative
/// at its end) by re-integrating partial steps from the step start.
fn bisect_step<G>(params: &ModelParams, law: ControlLaw, t0: f64, h: f64, x0: (f64, f64), g: G) -> f64
where
    G: Fn((f64, f64)) -> f64,
{
    let (mut lo, mut hi) = (0.0, h);
    while hi - lo > EVENT_TOL {
        let mid = 0.5 * (lo + hi);
        if g(advance(params, law, x0, mid)) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    t0 + 0.5 * (lo + hi)
}
