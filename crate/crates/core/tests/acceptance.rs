//! Acceptance suite on the benchmark scenario. Prints one PASS/FAIL line per
//! criterion and exits non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sir_control::*;

const I_MAX: f64 = 0.1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn benchmark() -> (ModelParams, EpidemiologicalObjective) {
    let p = ModelParams::benchmark();
    let o = EpidemiologicalObjective::herd_immunity(&p, I_MAX).unwrap();
    (p, o)
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn random_state(rng: &mut ChaCha8Rng) -> EpiState {
    let s: f64 = rng.gen_range(0.05..0.99);
    let i: f64 = rng.gen_range(1e-4..(1.0 - s).max(2e-4));
    EpiState::new(s, i.min(1.0 - s)).unwrap()
}

fn herd_immunity_value() -> Outcome {
    let h = herd_immunity(2.9).unwrap();
    outcome(format!("{h:.4}") == "0.3448", format!("herd_immunity(2.9) = {h:.6}"))
}

fn final_size_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.gen_range(0.5..4.0);
        let x0 = random_state(&mut rng);
        let p = ModelParams::new(r, 0.5 * r, 0.1, 1e-5).unwrap();
        let mut x = x0;
        for _ in 0..200 {
            if x.i < 1e-8 {
                break;
            }
            x = simulate(&p, &ControlSchedule::open_loop(), x, 1000.0, 0.05).unwrap().final_state();
        }
        let closed = s_infinity(r, x0.s, x0.i).unwrap().s_inf;
        worst = worst.max((closed - x.s).abs());
    }
    outcome(worst <= 1e-4, format!("max |closed form - simulation| = {worst:.2e} over 100 instances"))
}

fn peak_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 100 {
        let r = rng.gen_range(1.1..4.0);
        let x = random_state(&mut rng);
        if x.s * r <= 1.0 {
            continue;
        }
        let p = ModelParams::new(r, 0.5, 0.1, 1e-5).unwrap();
        let traj = simulate(&p, &ControlSchedule::open_loop(), x, 2000.0, 0.01).unwrap();
        worst = worst.max((peak_prevalence(r, x.s, x.i).unwrap() - traj.max_i()).abs());
        n += 1;
    }
    outcome(worst <= 1e-4, format!("max |closed form - simulated peak| = {worst:.2e} over 100 instances"))
}

fn final_size_maximization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut worst_arg, mut worst_val): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let r = rng.gen_range(1.2..4.0);
        let delta = rng.gen_range(0.0..0.2);
        let (value, arg) = max_s_infinity(r, delta).unwrap();
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut k = 1;
        while k as f64 * 1e-4 + delta <= 1.0 {
            let s = k as f64 * 1e-4;
            let v = s_infinity(r, s, delta).unwrap().s_inf;
            if v > best.0 {
                best = (v, s);
            }
            k += 1;
        }
        worst_arg = worst_arg.max((best.1 - arg.s).abs());
        worst_val = worst_val.max((best.0 - value).abs());
    }
    outcome(
        worst_arg <= 1e-4 + 1e-12 && worst_val <= 1e-6,
        format!("max argmax offset {worst_arg:.1e}, max value gap {worst_val:.1e} over 10 (R, delta)"),
    )
}

fn goldilocks_reproduction() -> Outcome {
    let (p, o) = benchmark();
    let rep = goldilocks(&p, &o, &SynthesisOptions::default()).unwrap();
    let tau_s = rep.timing("tau_s").unwrap();
    let r = rep.value("r_si").unwrap();
    let pass = within(tau_s, 43.71, 0.5)
        && within(r, 1.565, 0.01)
        && within(rep.efs, 0.6600, 0.005)
        && within(rep.ipp, 0.1001, 0.003)
        && within(rep.sdi, 301.71, 5.0);
    outcome(
        pass,
        format!(
            "tau_s = {tau_s:.2} d, R = {r:.4}, EFS = {:.4}, IPP = {:.4}, SDI = {:.2} (tau_f = {} d)",
            rep.efs,
            rep.ipp,
            rep.sdi,
            rep.timing("tau_f").unwrap()
        ),
    )
}

fn wms_reproduction() -> Outcome {
    let (p, o) = benchmark();
    let rep = wms(&p, &o, &SynthesisOptions::default()).unwrap();
    let tau_s = rep.timing("tau_s").unwrap();
    let tau_1 = rep.timing("tau_1").unwrap();
    let r = rep.value("r_si").unwrap();
    let pass = within(tau_s, 47.8, 0.5)
        && within(tau_1, 68.7, 1.0)
        && within(r, 1.5654, 0.005)
        && within(rep.efs, 0.6596, 0.005)
        && within(rep.ipp, 0.0998, 0.003)
        && within(rep.sdi, 298.86, 5.0);
    outcome(
        pass,
        format!(
            "tau_s = {tau_s:.2} d, tau_1* = {tau_1:.2} d, R* = {r:.4}, EFS = {:.4}, IPP = {:.4}, SDI = {:.2}",
            rep.efs, rep.ipp, rep.sdi
        ),
    )
}

fn p_opt_reproduction() -> Outcome {
    let (p, o) = benchmark();
    let cfg = OptConfig::new(&o);
    let rep = solve_p_opt(&p, &cfg).unwrap();
    let wms_sdi = wms(&p, &o, &SynthesisOptions::default()).unwrap().sdi;
    let s_t = rep.value("s_at_T").unwrap();
    let efs_horizon = 1.0 - rep.final_state.s;
    let pass = rep.feasible
        && rep.ipp <= 0.101
        && (s_t - o.s_star_target).abs() <= 2e-3
        && rep.sdi <= 202.0
        && within(rep.efs, 0.6725, 0.01)
        && rep.sdi < wms_sdi;
    outcome(
        pass,
        format!(
            "max I = {:.5}, |S(270) - S*| = {:.1e}, SDI = {:.2} (WMS {:.2}), EFS = {:.4} \
             [target 0.6725 +/- 0.01; 1 - S(300 d) = {efs_horizon:.4}; I(270) = {:.1e}]",
            rep.ipp,
            (s_t - o.s_star_target).abs(),
            rep.sdi,
            wms_sdi,
            rep.efs,
            rep.value("i_at_T").unwrap()
        ),
    )
}

fn weighted_ill_posed() -> Outcome {
    let (p, o) = benchmark();
    let mut both = Vec::new();
    let mut rows = Vec::new();
    for alpha_r in [0.20, 0.25, 0.30, 0.35, 0.40] {
        let rep = solve_weighted(&p, &o, &WeightedConfig::new(1.0, alpha_r)).unwrap();
        let peak_ok = rep.ipp <= 0.101;
        let size_ok = (rep.s_inf - o.s_star_target).abs() <= 0.01;
        if peak_ok && size_ok {
            both.push(alpha_r);
        }
        rows.push(format!("a_R={alpha_r:.2}: IPP {:.3}, S_inf {:.3}", rep.ipp, rep.s_inf));
    }
    outcome(both.is_empty(), rows.join("; "))
}

fn quantized_reproduction() -> Outcome {
    let (p, o) = benchmark();
    let cfg = QuantizedConfig::new(vec![0.660, 1.407, 2.153, 2.900], 10.0, 270.0);
    let rep = solve_quantized(&p, &cfg, &o).unwrap();
    let pass = rep.feasible && rep.ipp <= 0.101 && within(rep.efs, 0.6733, 0.01) && rep.sdi <= 215.0;
    outcome(
        pass,
        format!(
            "IPP = {:.4}, EFS = {:.4} [target 0.6733 +/- 0.01; 1 - S(300 d) = {:.4}; I(270) = {:.1e}], SDI = {:.2}",
            rep.ipp,
            rep.efs,
            1.0 - rep.final_state.s,
            rep.value("i_at_T").unwrap(),
            rep.sdi
        ),
    )
}

fn second_wave() -> Outcome {
    let p = ModelParams::benchmark();
    let x0 = EpiState::new(0.9, 0.065).unwrap();
    let r = r_star_single(0.7, x0.s, x0.i).unwrap();
    let lockdown = ControlSchedule::single_interval(0.0, 600.0, r).unwrap();
    let end = simulate(&p, &lockdown, x0, 600.0, 0.01).unwrap().final_state();
    let mut x = end;
    while x.i >= 1e-9 || x.s > 0.5 {
        x = simulate(&p, &ControlSchedule::open_loop(), x, 1000.0, 0.01).unwrap().final_state();
    }
    outcome(
        within(x.s, 0.13, 0.01),
        format!("lockdown ends at (S, I) = ({:.4}, {:.1e}); simulated S_inf = {:.4}", end.s, end.i, x.s),
    )
}

fn auc_identity() -> Outcome {
    let (p, o) = benchmark();
    let opts = SynthesisOptions::default();
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for rep in [goldilocks(&p, &o, &opts).unwrap(), wms(&p, &o, &opts).unwrap()] {
        let long = simulate(&p, &rep.schedule, p.initial_state(), 20_000.0, 0.05).unwrap();
        let auc = auc_infected(&long).unwrap();
        let s_inf = long.final_state().s;
        worst = worst.max((auc - (1.0 - s_inf)).abs());
        rows.push(format!("{}: int I dtau = {auc:.4}, 1 - S_inf = {:.4}", rep.strategy, 1.0 - s_inf));
    }
    outcome(worst <= 1e-2, rows.join("; "))
}

fn property_suites() -> Outcome {
    let mut failures = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let worst_w = (0..10_000)
        .map(|_| {
            let w: f64 = rng.gen_range(-1.0..5.0);
            (lambert_w0(w * w.exp()).unwrap() - w).abs()
        })
        .fold(0.0, f64::max);
    if worst_w > 1e-10 {
        failures.push(format!("Lambert round trip {worst_w:.1e}"));
    }

    let r = 2.9;
    let s_star = 1.0 / r;
    let above: Vec<f64> = (1..=100)
        .map(|k| s_infinity(r, s_star + (0.99 - s_star) * k as f64 / 100.0, 0.01).unwrap().s_inf)
        .collect();
    let below: Vec<f64> = (1..=100)
        .map(|k| s_infinity(r, s_star * k as f64 / 101.0, 0.01).unwrap().s_inf)
        .collect();
    let by_i: Vec<f64> = (1..=100)
        .map(|k| s_infinity(r, 0.5, 0.5 * k as f64 / 100.0).unwrap().s_inf)
        .collect();
    if !(above.windows(2).all(|w| w[1] < w[0])
        && below.windows(2).all(|w| w[1] > w[0])
        && by_i.windows(2).all(|w| w[1] < w[0])
        && s_infinity(50.0, 0.9, 0.05).unwrap().s_inf < 1e-3
        && (s_infinity(1e-3, 0.9, 0.05).unwrap().s_inf - 0.9).abs() < 1e-2)
    {
        failures.push("final-size monotonicity".into());
    }

    let p = ModelParams::benchmark();
    let traj = simulate(&p, &ControlSchedule::open_loop(), p.initial_state(), 300.0, 0.01).unwrap();
    let lyap_ok = traj.samples.windows(2).all(|w| {
        let a = lyapunov_value(w[0].state(), s_star).unwrap();
        let b = lyapunov_value(w[1].state(), s_star).unwrap();
        let a_low = lyapunov_value(w[0].state(), 0.8 * s_star).unwrap();
        let b_low = lyapunov_value(w[1].state(), 0.8 * s_star).unwrap();
        b <= a + 1e-9 && b_low <= a_low + 1e-12
    });
    if !lyap_ok {
        failures.push("Lyapunov sign".into());
    }

    let sched = ControlSchedule::single_interval(40.0, 120.0, 1.3).unwrap();
    let reference = simulate(&p, &sched, p.initial_state(), 300.0, 0.0125).unwrap().final_state();
    let err = |dt: f64| (simulate(&p, &sched, p.initial_state(), 300.0, dt).unwrap().final_state().s - reference.s).abs();
    let order = (err(0.4) / err(0.2)).log2();
    let a = simulate(&p, &sched, p.initial_state(), 300.0, 0.01).unwrap().final_state();
    let b = simulate(&p, &sched, p.initial_state(), 300.0, 0.005).unwrap().final_state();
    if !(3.5..4.5).contains(&order) || (a.s - b.s).abs() >= 1e-8 || (a.i - b.i).abs() >= 1e-8 {
        failures.push(format!("RK4 order {order:.2}"));
    }

    let (p, o) = benchmark();
    let opts = SynthesisOptions::default();
    for rep in [goldilocks(&p, &o, &opts).unwrap(), wms(&p, &o, &opts).unwrap()] {
        let bounded = rep.schedule.validate_for(&p).is_ok()
            && rep.schedule.end_time().is_some_and(f64::is_finite)
            && rep.trajectory.samples.iter().all(|x| x.r >= p.r_min && x.r <= p.r_bar);
        if !bounded {
            failures.push(format!("{} schedule bounds", rep.strategy));
        }
    }

    let detail = format!(
        "Lambert max error {worst_w:.1e}, RK4 observed order {order:.2}, monotonicity/Lyapunov/bounds checked{}",
        if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
    );
    outcome(failures.is_empty(), detail)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("herd immunity threshold", herd_immunity_value),
        ("final-size oracle equivalence", final_size_oracle),
        ("peak formula", peak_formula),
        ("final-size maximization at S*", final_size_maximization),
        ("goldilocks reproduction", goldilocks_reproduction),
        ("wait-maintain-suspend reproduction", wms_reproduction),
        ("optimal control reproduction", p_opt_reproduction),
        ("weighted-variant ill-posedness", weighted_ill_posed),
        ("quantized control reproduction", quantized_reproduction),
        ("second-wave property", second_wave),
        ("AUC identity", auc_identity),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2}. {name}: {} ({secs:.1} s)", k + 1, result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
