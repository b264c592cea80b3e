use std::fs;
use std::path::Path;

use sir_control::{
    evaluate_schedule, goldilocks, open_loop, solve_p_opt, solve_quantized, solve_weighted, wms, ControlSchedule,
    StrategyReport,
};

use crate::config::{Scenario, StrategyKind};
use crate::output::{self, Row};
use crate::{CliError, Outcome};

/// Runs one strategy of the scenario.
pub fn run_strategy(scn: &Scenario, kind: StrategyKind) -> sir_control::Result<StrategyReport> {
    let (p, o, sim) = (&scn.params, &scn.objective, &scn.sim);
    match kind {
        StrategyKind::OpenLoop => match scn.x0 {
            None => open_loop(p, o, sim),
            Some(x0) => evaluate_schedule("open_loop", p, o, ControlSchedule::open_loop(), x0, sim.horizon, sim.dt),
        },
        StrategyKind::Goldilocks => goldilocks(p, o, sim),
        StrategyKind::Wms => wms(p, o, sim),
        StrategyKind::POpt => solve_p_opt(p, &scn.opt),
        StrategyKind::Weighted => solve_weighted(p, o, &scn.weighted),
        StrategyKind::Quantized => solve_quantized(p, &scn.quantized, o),
        StrategyKind::SingleInterval => {
            let single = scn
                .single
                .expect("single_interval is only accepted with a [single] table");
            let sched = ControlSchedule::single_interval(single.start, single.end, single.r)?;
            evaluate_schedule("single_interval", p, o, sched, scn.initial_state(), sim.horizon, sim.dt)
        }
    }
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Runs `kind` and writes its trajectory, schedule and report files.
fn run_and_write(scn: &Scenario, kind: StrategyKind) -> Result<Result<StrategyReport, String>, CliError> {
    let dir = &scn.out_dir;
    let report_path = dir.join(format!("{kind}_report.txt"));
    match run_strategy(scn, kind) {
        Ok(report) => {
            output::write_trajectory(
                &dir.join(format!("{kind}_trajectory.csv")),
                &report.trajectory,
                scn.stride,
                scn.objective.s_star_target,
            )?;
            output::write_schedule(&dir.join(format!("{kind}_schedule.csv")), &report)?;
            output::write_text(&report_path, &output::report_text(&report))?;
            Ok(Ok(report))
        }
        Err(e) => {
            let message = e.to_string();
            output::write_text(&report_path, &output::error_report(kind.name(), &message))?;
            Ok(Err(message))
        }
    }
}

fn require_strategy(scn: &Scenario) -> Result<StrategyKind, CliError> {
    scn.strategy
        .ok_or_else(|| CliError::Usage("the config has no `strategy` key".into()))
}

pub fn run(scn: &Scenario) -> Result<Outcome, CliError> {
    let kind = require_strategy(scn)?;
    prepare_dir(&scn.out_dir)?;
    Ok(match run_and_write(scn, kind)? {
        Ok(r) if r.feasible => Outcome::Feasible,
        Ok(_) => Outcome::Infeasible(format!("{kind}: constraints not met")),
        Err(e) => Outcome::Infeasible(format!("{kind}: {e}")),
    })
}

pub fn compare(scn: &Scenario, strategies: &[StrategyKind]) -> Result<Outcome, CliError> {
    if strategies.is_empty() {
        return Err(CliError::Usage("--strategies needs at least one strategy".into()));
    }
    for &kind in strategies {
        scn.check_strategy(kind).map_err(CliError::Usage)?;
    }
    prepare_dir(&scn.out_dir)?;
    let mut rows = Vec::with_capacity(strategies.len());
    for &kind in strategies {
        rows.push(Row {
            strategy: kind.name().to_string(),
            outcome: run_and_write(scn, kind)?,
        });
    }
    output::write_comparison(&scn.out_dir, &rows)?;
    let failed: Vec<&str> = rows
        .iter()
        .filter(|r| r.outcome.is_err())
        .map(|r| r.strategy.as_str())
        .collect();
    Ok(if failed.is_empty() {
        Outcome::Feasible
    } else {
        Outcome::Infeasible(format!("failed: {}", failed.join(", ")))
    })
}

/// Writes the phase-plane trajectory and the Lyapunov level curves. A run
/// that misses its targets still yields a plot; only a failed run is an
/// error.
pub fn phase(scn: &Scenario) -> Result<Outcome, CliError> {
    let kind = require_strategy(scn)?;
    prepare_dir(&scn.out_dir)?;
    let report = match run_strategy(scn, kind) {
        Ok(r) => r,
        Err(e) => return Ok(Outcome::Infeasible(format!("{kind}: {e}"))),
    };
    output::write_phase_trajectory(
        &scn.out_dir.join("phase_trajectory.csv"),
        &report.trajectory,
        scn.stride,
        scn.objective.s_star_target,
    )?;
    output::write_levels(
        &scn.out_dir.join("phase_levels.csv"),
        &scn.phase.s_bar,
        &scn.phase.levels,
        scn.phase.grid,
    )?;
    Ok(Outcome::Feasible)
}
