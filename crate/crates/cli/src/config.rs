//! Scenario files: TOML with one table per concern.
//!
//! ```toml
//! strategy = "wms"
//!
//! [model]
//! r_bar = 2.9
//! r_min = 0.66
//! gamma = 0.1
//! epsilon = 1.49e-5
//!
//! [objective]
//! i_max = 0.1
//! ```
//!
//! Every other key is optional; see [`Scenario`] for the defaults.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use sir_control::{
    EpiState, EpidemiologicalObjective, ModelParams, OptConfig, QuantizedConfig, SynthesisOptions, WeightedConfig,
};
use toml::Spanned;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) if self.key.is_empty() => write!(f, "config error (line {line}): {}", self.message),
            Some(line) => write!(f, "config error at {} (line {line}): {}", self.key, self.message),
            None if self.key.is_empty() => write!(f, "config error: {}", self.message),
            None => write!(f, "config error at {}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    OpenLoop,
    Goldilocks,
    Wms,
    POpt,
    Weighted,
    Quantized,
    SingleInterval,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::OpenLoop,
        StrategyKind::Goldilocks,
        StrategyKind::Wms,
        StrategyKind::POpt,
        StrategyKind::Weighted,
        StrategyKind::Quantized,
        StrategyKind::SingleInterval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::OpenLoop => "open_loop",
            StrategyKind::Goldilocks => "goldilocks",
            StrategyKind::Wms => "wms",
            StrategyKind::POpt => "p_opt",
            StrategyKind::Weighted => "weighted",
            StrategyKind::Quantized => "quantized",
            StrategyKind::SingleInterval => "single_interval",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = StrategyKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown strategy `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// A fixed intervention `[start, end)` at contact rate `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleInterval {
    pub start: f64,
    pub end: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    /// Centres of the Lyapunov level curves.
    pub s_bar: Vec<f64>,
    pub levels: Vec<f64>,
    /// Number of `S` grid points on `(0, 1]`.
    pub grid: usize,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub strategy: Option<StrategyKind>,
    pub params: ModelParams,
    /// Custom initial state; honoured by `open_loop` and `single_interval`.
    pub x0: Option<EpiState>,
    pub objective: EpidemiologicalObjective,
    pub sim: SynthesisOptions,
    /// Spacing of the trajectory CSV rows, days.
    pub stride: f64,
    pub out_dir: PathBuf,
    pub opt: OptConfig,
    pub weighted: WeightedConfig,
    pub quantized: QuantizedConfig,
    pub single: Option<SingleInterval>,
    pub phase: PhaseConfig,
}

type Num = Option<Spanned<f64>>;
type Count = Option<Spanned<i64>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    strategy: Option<Spanned<String>>,
    model: Option<Spanned<RawModel>>,
    objective: Option<Spanned<RawObjective>>,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    opt: RawOpt,
    #[serde(default)]
    weighted: RawWeighted,
    #[serde(default)]
    quantized: RawQuantized,
    single: Option<Spanned<RawSingle>>,
    #[serde(default)]
    phase: RawPhase,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    r_bar: Num,
    r_min: Num,
    gamma: Num,
    epsilon: Num,
    s0: Num,
    i0: Num,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    i_max: Num,
    s_star_target: Num,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSim {
    horizon: Num,
    dt: Num,
    intervention_end: Num,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    stride: Num,
    dir: Option<Spanned<String>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOpt {
    n_intervals: Count,
    terminal_tol: Num,
    penalty_schedule: Option<Spanned<Vec<f64>>>,
    max_outer_iters: Count,
    max_inner_iters: Count,
    dt: Num,
    fd_step: Num,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawWeighted {
    alpha_i: Num,
    alpha_r: Num,
    n_intervals: Count,
    max_iters: Count,
    dt: Num,
    fd_step: Num,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawQuantized {
    levels: Option<Spanned<Vec<f64>>>,
    dwell_min: Num,
    beam_width: Count,
    terminal_tol: Num,
    require_qss: Option<Spanned<bool>>,
    dt: Num,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSingle {
    start: Num,
    end: Num,
    r: Num,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPhase {
    s_bar: Option<Spanned<Vec<f64>>>,
    levels: Option<Spanned<Vec<f64>>>,
    grid: Count,
}

/// Maps byte offsets of the source to 1-based line numbers.
struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn of(&self, span: Range<usize>) -> usize {
        let end = span.start.min(self.0.len());
        self.0.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
    }

    /// Dotted path of the key assigned on `line`, prefixed by the
    /// enclosing `[table]` header.
    fn key_at(&self, line: usize) -> String {
        let mut table = String::new();
        for text in self.0.lines().take(line) {
            let t = text.trim();
            if t.starts_with('[') && t.ends_with(']') {
                table = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            }
        }
        let text = self.0.lines().nth(line - 1).unwrap_or("").trim();
        match text.split_once('=') {
            Some((k, _)) if table.is_empty() => k.trim().to_string(),
            Some((k, _)) => format!("{table}.{}", k.trim()),
            None => table,
        }
    }

    fn err<T>(&self, key: &str, span: Option<Range<usize>>, message: impl Into<String>) -> Result<T, ConfigError> {
        Err(ConfigError {
            key: key.to_string(),
            line: span.map(|s| self.of(s)),
            message: message.into(),
        })
    }

    fn required(&self, key: &str, field: &Num, table: Option<Range<usize>>) -> Result<f64, ConfigError> {
        match field {
            Some(v) => self.finite(key, v),
            None => self.err(key, table, "missing required key"),
        }
    }

    fn optional(&self, key: &str, field: &Num, default: f64) -> Result<f64, ConfigError> {
        match field {
            Some(v) => self.finite(key, v),
            None => Ok(default),
        }
    }

    fn finite(&self, key: &str, v: &Spanned<f64>) -> Result<f64, ConfigError> {
        if v.get_ref().is_finite() {
            Ok(*v.get_ref())
        } else {
            self.err(key, Some(v.span()), "must be a finite number")
        }
    }

    fn positive(&self, key: &str, field: &Num, default: f64) -> Result<f64, ConfigError> {
        let v = self.optional(key, field, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            self.err(key, field.as_ref().map(|f| f.span()), format!("must be > 0 (got {v})"))
        }
    }

    fn count(&self, key: &str, field: &Count, default: usize) -> Result<usize, ConfigError> {
        match field {
            None => Ok(default),
            Some(v) if *v.get_ref() >= 1 => Ok(*v.get_ref() as usize),
            Some(v) => self.err(key, Some(v.span()), format!("must be a positive integer (got {})", v.get_ref())),
        }
    }

    /// Re-labels a library validation error with the key it most likely
    /// concerns.
    fn library<T>(&self, key: &str, span: Option<Range<usize>>, r: sir_control::Result<T>) -> Result<T, ConfigError> {
        r.or_else(|e| self.err(key, span, e.to_string()))
    }
}

fn span_of<T>(field: &Option<Spanned<T>>) -> Option<Range<usize>> {
    field.as_ref().map(|f| f.span())
}

/// Picks the key a model-parameter error message talks about.
fn model_key(message: &str) -> &'static str {
    ["r_min", "r_bar", "gamma", "epsilon"]
        .into_iter()
        .find(|k| message.contains(k))
        .unwrap_or("r_bar")
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            key: String::new(),
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let lines = Lines(text);
        let raw: RawScenario = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| lines.of(s));
            ConfigError {
                key: line.map(|l| lines.key_at(l)).unwrap_or_default(),
                line,
                message: e.message().trim().to_string(),
            }
        })?;

        let strategy = match &raw.strategy {
            None => None,
            Some(s) => Some(
                s.get_ref()
                    .parse::<StrategyKind>()
                    .or_else(|m| lines.err("strategy", Some(s.span()), m))?,
            ),
        };

        let Some(model) = &raw.model else {
            return lines.err("model", None, "missing required table");
        };
        let (model_span, m) = (Some(model.span()), model.get_ref());
        let r_bar = lines.required("model.r_bar", &m.r_bar, model_span.clone())?;
        let r_min = lines.required("model.r_min", &m.r_min, model_span.clone())?;
        let gamma = lines.required("model.gamma", &m.gamma, model_span.clone())?;
        let epsilon = lines.required("model.epsilon", &m.epsilon, model_span.clone())?;
        let params = ModelParams::new(r_bar, r_min, gamma, epsilon).or_else(|e| {
            let message = e.to_string();
            let key = model_key(&message);
            let span = match key {
                "r_min" => span_of(&m.r_min),
                "gamma" => span_of(&m.gamma),
                "epsilon" => span_of(&m.epsilon),
                _ => span_of(&m.r_bar),
            };
            lines.err(&format!("model.{key}"), span, message)
        })?;

        let x0 = match (&m.s0, &m.i0) {
            (None, None) => None,
            (Some(_), None) => return lines.err("model.i0", model_span, "s0 is set, so i0 is required"),
            (None, Some(_)) => return lines.err("model.s0", model_span, "i0 is set, so s0 is required"),
            (Some(s), Some(i)) => {
                let (s0, i0) = (lines.finite("model.s0", s)?, lines.finite("model.i0", i)?);
                Some(lines.library("model.s0", Some(s.span()), EpiState::new(s0, i0))?)
            }
        };

        let Some(objective) = &raw.objective else {
            return lines.err("objective", None, "missing required table");
        };
        let (obj_span, o) = (Some(objective.span()), objective.get_ref());
        let i_max = lines.required("objective.i_max", &o.i_max, obj_span)?;
        let objective = match &o.s_star_target {
            None => lines.library(
                "objective.i_max",
                span_of(&o.i_max),
                EpidemiologicalObjective::herd_immunity(&params, i_max),
            )?,
            Some(s) => {
                let target = lines.finite("objective.s_star_target", s)?;
                lines.library(
                    "objective.s_star_target",
                    Some(s.span()),
                    EpidemiologicalObjective::new(target, i_max),
                )?
            }
        };

        let defaults = SynthesisOptions::default();
        let sim = SynthesisOptions {
            dt: lines.positive("sim.dt", &raw.sim.dt, defaults.dt)?,
            horizon: lines.positive("sim.horizon", &raw.sim.horizon, defaults.horizon)?,
            intervention_end: lines.positive(
                "sim.intervention_end",
                &raw.sim.intervention_end,
                defaults.intervention_end,
            )?,
        };
        if sim.intervention_end > sim.horizon {
            return lines.err(
                "sim.intervention_end",
                span_of(&raw.sim.intervention_end),
                format!("must not exceed sim.horizon ({})", sim.horizon),
            );
        }

        let stride = lines.positive("output.stride", &raw.output.stride, 0.1)?;
        if stride < sim.dt {
            return lines.err(
                "output.stride",
                span_of(&raw.output.stride),
                format!("must be at least sim.dt ({})", sim.dt),
            );
        }
        let out_dir = PathBuf::from(raw.output.dir.as_ref().map_or("out", |d| d.get_ref().as_str()));

        let t_days = sim.intervention_end;
        let default_intervals = t_days.round().max(1.0) as usize;

        let mut opt = OptConfig::new(&objective);
        opt.t_horizon = t_days;
        opt.n_intervals = lines.count("opt.n_intervals", &raw.opt.n_intervals, default_intervals)?;
        opt.terminal_tol = lines.positive("opt.terminal_tol", &raw.opt.terminal_tol, opt.terminal_tol)?;
        if let Some(p) = &raw.opt.penalty_schedule {
            opt.penalty_schedule = p.get_ref().clone();
        }
        opt.max_outer_iters = lines.count("opt.max_outer_iters", &raw.opt.max_outer_iters, opt.max_outer_iters)?;
        opt.max_inner_iters = lines.count("opt.max_inner_iters", &raw.opt.max_inner_iters, opt.max_inner_iters)?;
        opt.dt = lines.positive("opt.dt", &raw.opt.dt, opt.dt)?;
        opt.fd_step = lines.positive("opt.fd_step", &raw.opt.fd_step, opt.fd_step)?;
        opt.verify_dt = sim.dt;
        opt.report_horizon = sim.horizon;
        lines.library("opt", span_of(&raw.opt.penalty_schedule), opt.validate())?;

        let w = &raw.weighted;
        let mut weighted = WeightedConfig::new(
            lines.optional("weighted.alpha_i", &w.alpha_i, 1.0)?,
            lines.optional("weighted.alpha_r", &w.alpha_r, 0.25)?,
        );
        weighted.t_horizon = t_days;
        weighted.n_intervals = lines.count("weighted.n_intervals", &w.n_intervals, default_intervals)?;
        weighted.max_iters = lines.count("weighted.max_iters", &w.max_iters, weighted.max_iters)?;
        weighted.dt = lines.positive("weighted.dt", &w.dt, weighted.dt)?;
        weighted.fd_step = lines.positive("weighted.fd_step", &w.fd_step, weighted.fd_step)?;
        weighted.verify_dt = sim.dt;
        weighted.report_horizon = sim.horizon;
        lines.library("weighted", span_of(&w.alpha_i).or(span_of(&w.alpha_r)), weighted.validate())?;

        let q = &raw.quantized;
        let levels = match &q.levels {
            Some(l) => l.get_ref().clone(),
            None => default_levels(&params),
        };
        let mut quantized = QuantizedConfig::new(levels, lines.positive("quantized.dwell_min", &q.dwell_min, 10.0)?, t_days);
        quantized.beam_width = lines.count("quantized.beam_width", &q.beam_width, quantized.beam_width)?;
        quantized.terminal_tol = lines.positive("quantized.terminal_tol", &q.terminal_tol, quantized.terminal_tol)?;
        if let Some(b) = &q.require_qss {
            quantized.require_qss = *b.get_ref();
        }
        quantized.dt = lines.positive("quantized.dt", &q.dt, quantized.dt)?;
        quantized.verify_dt = sim.dt;
        quantized.report_horizon = sim.horizon;
        let qspan = span_of(&q.levels).or(span_of(&q.dwell_min));
        lines.library("quantized", qspan, quantized.validate(&params))?;

        let single = match &raw.single {
            None => None,
            Some(s) => {
                let span = Some(s.span());
                let s = s.get_ref();
                let start = lines.required("single.start", &s.start, span.clone())?;
                let end = lines.required("single.end", &s.end, span.clone())?;
                let r = lines.required("single.r", &s.r, span.clone())?;
                if !(0.0..end).contains(&start) {
                    return lines.err("single.start", span_of(&s.start), "need 0 <= start < end");
                }
                if !(params.r_min..=params.r_bar).contains(&r) {
                    return lines.err(
                        "single.r",
                        span_of(&s.r),
                        format!("must lie in [r_min, r_bar] = [{}, {}]", params.r_min, params.r_bar),
                    );
                }
                Some(SingleInterval { start, end, r })
            }
        };

        let p = &raw.phase;
        let phase = PhaseConfig {
            s_bar: p.s_bar.as_ref().map_or(vec![objective.s_star_target], |v| v.get_ref().clone()),
            levels: p.levels.as_ref().map_or(default_phase_levels(), |v| v.get_ref().clone()),
            grid: lines.count("phase.grid", &p.grid, 400)?,
        };
        if let Some(bad) = phase.s_bar.iter().find(|s| !(**s > 0.0 && **s <= 1.0)) {
            return lines.err("phase.s_bar", span_of(&p.s_bar), format!("centres must lie in (0, 1] (got {bad})"));
        }
        if let Some(bad) = phase.levels.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return lines.err("phase.levels", span_of(&p.levels), format!("levels must be >= 0 (got {bad})"));
        }

        let scenario = Scenario {
            strategy,
            params,
            x0,
            objective,
            sim,
            stride,
            out_dir,
            opt,
            weighted,
            quantized,
            single,
            phase,
        };
        if let Some(kind) = strategy {
            scenario
                .check_strategy(kind)
                .or_else(|m| lines.err("strategy", span_of(&raw.strategy), m))?;
        }
        Ok(scenario)
    }

    /// Whether `kind` can run on this scenario.
    pub fn check_strategy(&self, kind: StrategyKind) -> Result<(), String> {
        if self.x0.is_some() && !matches!(kind, StrategyKind::OpenLoop | StrategyKind::SingleInterval) {
            return Err(format!("{kind} starts from the outbreak state; model.s0/i0 only apply to open_loop and single_interval"));
        }
        if kind == StrategyKind::SingleInterval && self.single.is_none() {
            return Err("single_interval needs a [single] table with start, end and r".into());
        }
        Ok(())
    }

    /// Replaces the integration step, as `--dt` does.
    pub fn with_dt(mut self, dt: f64) -> Result<Self, ConfigError> {
        let fail = |message: String| ConfigError {
            key: "--dt".into(),
            line: None,
            message,
        };
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(fail(format!("must be > 0 (got {dt})")));
        }
        if self.stride < dt {
            return Err(fail(format!("must not exceed output.stride ({})", self.stride)));
        }
        self.sim.dt = dt;
        self.opt.verify_dt = dt;
        self.weighted.verify_dt = dt;
        self.quantized.verify_dt = dt;
        Ok(self)
    }

    pub fn initial_state(&self) -> EpiState {
        self.x0.unwrap_or_else(|| self.params.initial_state())
    }
}

/// Four levels spread evenly over `[r_min, r_bar]`.
fn default_levels(params: &ModelParams) -> Vec<f64> {
    (0..4)
        .map(|k| params.r_min + (params.r_bar - params.r_min) * k as f64 / 3.0)
        .collect()
}

fn default_phase_levels() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.4]
}
