//! CSV and report writers. Everything goes through [`crate::format::num`]
//! so that identical runs produce identical bytes.

use std::fs;
use std::path::Path;

use sir_control::{lyapunov_value, ControlLaw, Sample, StrategyReport, Trajectory};

use crate::format::num;
use crate::CliError;

pub const TRAJECTORY_HEADER: [&str; 6] = ["t_days", "tau", "S", "I", "R", "V_lyap"];

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Samples kept in the CSV: the first and last, every schedule boundary and
/// every sample on a multiple of `stride`.
pub fn strided(traj: &Trajectory, stride: f64) -> Vec<&Sample> {
    let n = traj.samples.len();
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    for &b in &traj.boundaries {
        keep[b] = true;
    }
    for (k, x) in traj.samples.iter().enumerate() {
        let q = x.t / stride;
        if (q - q.round()).abs() * stride <= 1e-7 {
            keep[k] = true;
        }
    }
    traj.samples.iter().zip(keep).filter(|(_, k)| *k).map(|(x, _)| x).collect()
}

pub fn write_trajectory(path: &Path, traj: &Trajectory, stride: f64, s_bar: f64) -> Result<(), CliError> {
    let rows = strided(traj, stride).into_iter().map(|x| {
        let v = lyapunov_value(x.state(), s_bar).map_or(f64::NAN, |v| v);
        vec![num(x.t), num(x.tau), num(x.s), num(x.i), num(x.state().removed()), num(v)]
    });
    write_csv(path, &TRAJECTORY_HEADER, rows)
}

/// One row per schedule segment; `r` is empty for the `R = 1/S` law.
pub fn write_schedule(path: &Path, report: &StrategyReport) -> Result<(), CliError> {
    let rows = report.schedule.segments().iter().map(|seg| {
        let (law, r) = match seg.law {
            ControlLaw::Constant(r) => ("constant", num(r)),
            ControlLaw::InverseSusceptible => ("inverse_susceptible", String::new()),
        };
        vec![num(seg.start), num(seg.end), law.to_string(), r]
    });
    write_csv(path, &["start", "end", "law", "r"], rows)
}

pub fn report_text(report: &StrategyReport) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(": ");
        out.push_str(&v);
        out.push('\n');
    };
    line("strategy", report.strategy.clone());
    line("feasible", report.feasible.to_string());
    line("EFS", num(report.efs));
    line("IPP", num(report.ipp));
    line("SDI", num(report.sdi));
    line("s_inf", num(report.s_inf));
    line("final_t", num(report.trajectory.last().t));
    line("final_S", num(report.final_state.s));
    line("final_I", num(report.final_state.i));
    for (k, v) in &report.timings {
        line(&format!("timing.{k}"), num(*v));
    }
    for (k, v) in &report.values {
        line(&format!("value.{k}"), num(*v));
    }
    line("segments", report.schedule.segments().len().to_string());
    for note in &report.notes {
        line("note", note.clone());
    }
    out
}

pub fn error_report(strategy: &str, message: &str) -> String {
    format!("strategy: {strategy}\nfeasible: false\nerror: {message}\n")
}

/// One line of the comparison table.
pub struct Row {
    pub strategy: String,
    pub outcome: Result<StrategyReport, String>,
}

const COMPARISON_HEADER: [&str; 8] = ["strategy", "feasible", "EFS", "IPP", "SDI", "s_inf", "timings", "error"];

fn cells(row: &Row) -> Vec<String> {
    match &row.outcome {
        Ok(r) => {
            let timings: Vec<String> = r.timings.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect();
            vec![
                row.strategy.clone(),
                r.feasible.to_string(),
                num(r.efs),
                num(r.ipp),
                num(r.sdi),
                num(r.s_inf),
                timings.join(";"),
                String::new(),
            ]
        }
        Err(e) => {
            let mut v = vec![row.strategy.clone(), "false".into()];
            v.extend(std::iter::repeat(String::new()).take(5));
            v.push(e.clone());
            v
        }
    }
}

pub fn write_comparison(dir: &Path, rows: &[Row]) -> Result<(), CliError> {
    let table: Vec<Vec<String>> = rows.iter().map(cells).collect();
    write_csv(&dir.join("comparison.csv"), &COMPARISON_HEADER, table.clone())?;

    let mut widths: Vec<usize> = COMPARISON_HEADER.iter().map(|h| h.len()).collect();
    for r in &table {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let render = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut text = render(&COMPARISON_HEADER.map(String::from));
    text.push_str(&render(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
    for r in &table {
        text.push_str(&render(r));
    }
    write_text(&dir.join("comparison.txt"), &text)
}

pub fn write_phase_trajectory(path: &Path, traj: &Trajectory, stride: f64, s_bar: f64) -> Result<(), CliError> {
    let rows = strided(traj, stride).into_iter().map(|x| {
        let v = lyapunov_value(x.state(), s_bar).map_or(f64::NAN, |v| v);
        vec![num(x.t), num(x.s), num(x.i), num(v)]
    });
    write_csv(path, &["t_days", "S", "I", "V_lyap"], rows)
}

/// Points of the level curve `V(S, I; s_bar) = level` solved for `I` on an
/// `S` grid, restricted to `I >= 0` and `S + I <= 1`.
pub fn level_curve(s_bar: f64, level: f64, grid: usize) -> Vec<(f64, f64)> {
    let mut s_values: Vec<f64> = (1..=grid).map(|k| k as f64 / grid as f64).collect();
    if s_bar <= 1.0 && !s_values.contains(&s_bar) {
        s_values.push(s_bar);
        s_values.sort_by(f64::total_cmp);
    }
    s_values
        .into_iter()
        .filter_map(|s| {
            let i = level - (s - s_bar - s_bar * (s / s_bar).ln());
            (i >= 0.0 && s + i <= 1.0).then_some((s, i))
        })
        .collect()
}

pub fn write_levels(path: &Path, s_bars: &[f64], levels: &[f64], grid: usize) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &s_bar in s_bars {
        for &level in levels {
            for (s, i) in level_curve(s_bar, level, grid) {
                rows.push(vec![num(s_bar), num(level), num(s), num(i)]);
            }
        }
    }
    write_csv(path, &["s_bar", "level", "S", "I"], rows)
}
