//! SIR epidemic analysis and social-distancing schedule synthesis.
//!
//! The crate covers the closed-form theory of the controlled SIR model
//! (final size via Lambert W, peak prevalence, herd immunity, Lyapunov
//! diagnostics), a fixed-step simulator with event detection, analytic
//! intervention designs and an SDI-minimizing optimal-control solver with
//! continuous and quantized control sets.

pub mod analysis;
pub mod error;
pub mod lambert;
pub mod model;
pub mod optimal;
pub mod strategies;

pub use analysis::{
    auc_infected, classify_equilibrium, herd_immunity, lyapunov_rate, lyapunov_value, max_s_infinity,
    peak_prevalence, s_infinity, EquilibriumClass, FinalSize, Stability, QSS_THRESHOLD,
};
pub use error::{Error, Result};
pub use lambert::lambert_w0;
pub use model::{
    derivative, find_time, simulate, simulate_watching, Condition, ControlLaw, ControlSchedule, EpiState,
    Event, ModelParams, Sample, Segment, Trajectory, DEFAULT_DT,
};
pub use strategies::{
    evaluate_schedule, goldilocks, open_loop, r_hat_single, r_star_single, sdi, wms, EpidemiologicalObjective,
    PeakCapSolution, StrategyReport, SynthesisOptions,
};
pub use optimal::{solve_p_opt, solve_quantized, solve_weighted, OptConfig, QuantizedConfig, WeightedConfig};
