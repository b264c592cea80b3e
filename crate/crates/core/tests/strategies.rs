use sir_control::*;

fn benchmark() -> (ModelParams, EpidemiologicalObjective, SynthesisOptions) {
    let p = ModelParams::benchmark();
    let o = EpidemiologicalObjective::herd_immunity(&p, 0.1).unwrap();
    (p, o, SynthesisOptions::default())
}

fn open_loop_state(p: &ModelParams, t: f64) -> EpiState {
    simulate(p, &ControlSchedule::open_loop(), p.initial_state(), t, 0.01).unwrap().final_state()
}

fn assert_in_bounds(report: &StrategyReport, p: &ModelParams) {
    report.schedule.validate_for(p).unwrap();
    for x in &report.trajectory.samples {
        assert!(x.r >= p.r_min - 1e-12 && x.r <= p.r_bar + 1e-12);
    }
    if let Some(end) = report.schedule.end_time() {
        assert!(end.is_finite());
    }
}

#[test]
fn r_star_example() {
    // ln(0.9 / S*) / (0.9 + 0.065 - S*), evaluated independently.
    let r = r_star_single(1.0 / 2.9, 0.9, 0.065).unwrap();
    assert!((r - 1.546_908_891_782_232_7).abs() < 1e-12);
}

#[test]
fn goldilocks_sits_on_the_intersection() {
    let (p, o, opts) = benchmark();
    let rep = goldilocks(&p, &o, &opts).unwrap();
    let tau_s = rep.timing("tau_s").unwrap();
    let x = open_loop_state(&p, tau_s);
    let r_star = r_star_single(o.s_star_target, x.s, x.i).unwrap();
    let r_hat = r_hat_single(o.i_max, x.s, x.i, (p.r_min, p.r_bar)).unwrap().value();
    assert!((r_star - r_hat).abs() < 1e-6, "{r_star} vs {r_hat}");
    assert!((rep.value("r_si").unwrap() - r_star).abs() < 1e-6);
    assert_in_bounds(&rep, &p);
}

#[test]
fn goldilocks_is_fragile() {
    let (p, o, opts) = benchmark();
    let rep = goldilocks(&p, &o, &opts).unwrap();
    let tau_s = rep.timing("tau_s").unwrap();
    let r = rep.value("r_si").unwrap();
    for shift in [-2.0, 2.0] {
        let sched = ControlSchedule::single_interval(tau_s + shift, opts.intervention_end, r).unwrap();
        let moved = evaluate_schedule("shifted", &p, &o, sched, p.initial_state(), opts.horizon, opts.dt).unwrap();
        let peak_broken = moved.ipp > o.i_max + 1e-3;
        let size_broken = (moved.s_inf - o.s_star_target).abs() > 0.01;
        assert!(peak_broken || size_broken, "shift {shift}: ipp {} s_inf {}", moved.ipp, moved.s_inf);
        assert!(!moved.feasible);
    }
}

#[test]
fn wms_maintain_phase_holds_prevalence() {
    let (p, o, opts) = benchmark();
    let rep = wms(&p, &o, &opts).unwrap();
    let (t_s, t_1) = (rep.timing("tau_s").unwrap(), rep.timing("tau_1").unwrap());
    assert!(t_s < t_1);
    let inside: Vec<&Sample> = rep
        .trajectory
        .samples
        .iter()
        .filter(|x| x.t >= t_s + 1e-9 && x.t <= t_1 - 1e-9)
        .collect();
    assert!(inside.len() > 100);
    for x in &inside {
        assert!((x.i - o.i_max).abs() < 1e-6, "I = {} at t = {}", x.i, x.t);
    }
    // With I held fixed, S falls linearly at rate gamma * I.
    let slope = (inside.last().unwrap().s - inside[0].s) / (inside.last().unwrap().t - inside[0].t);
    assert!((slope + p.gamma * o.i_max).abs() < 1e-6, "{slope}");
    assert_in_bounds(&rep, &p);
}

#[test]
fn wms_converges_with_longer_interventions() {
    let (p, o, _) = benchmark();
    let mut gaps = Vec::new();
    for end in [200.0, 270.0, 400.0] {
        let opts = SynthesisOptions {
            intervention_end: end,
            horizon: end + 30.0,
            ..Default::default()
        };
        let rep = wms(&p, &o, &opts).unwrap();
        let at_end = simulate(&p, &rep.schedule, p.initial_state(), end, 0.01).unwrap().final_state();
        gaps.push(((at_end.s - o.s_star_target).abs(), at_end.i));
    }
    assert!(gaps.windows(2).all(|w| w[1].0 <= w[0].0 && w[1].1 < w[0].1), "{gaps:?}");
    assert!(gaps[2].1 < 1e-3);
}

#[test]
fn auc_identity_on_synthesized_runs() {
    let (p, o, opts) = benchmark();
    for rep in [goldilocks(&p, &o, &opts).unwrap(), wms(&p, &o, &opts).unwrap()] {
        let long = simulate(&p, &rep.schedule, p.initial_state(), 20_000.0, 0.05).unwrap();
        let auc = auc_infected(&long).unwrap();
        let s_inf = s_infinity(p.r_bar, long.final_state().s, long.final_state().i).unwrap().s_inf;
        assert!((auc - (1.0 - s_inf)).abs() < 1e-2);
        assert!((auc - (1.0 - o.s_star_target)).abs() < 1e-2, "{}: {auc}", rep.strategy);
    }
}

#[test]
fn second_wave_after_early_lockdown() {
    let (p, _, _) = benchmark();
    let x0 = EpiState::new(0.9, 0.065).unwrap();
    let r = r_star_single(0.7, x0.s, x0.i).unwrap();
    assert!(r < 1.0 / 0.7);
    let lockdown = ControlSchedule::single_interval(0.0, 600.0, r).unwrap();
    let end = simulate(&p, &lockdown, x0, 600.0, 0.01).unwrap().final_state();
    assert!((end.s - 0.7).abs() < 1e-3 && end.i < 1e-6, "{end:?}");
    let predicted = s_infinity(p.r_bar, end.s, end.i).unwrap().s_inf;
    assert!((predicted - 0.13).abs() < 0.01, "{predicted}");
    // The released outbreak really happens: simulate it to rest.
    let mut x = end;
    let open = ControlSchedule::open_loop();
    while x.i >= 1e-9 || x.s > 0.5 {
        x = simulate(&p, &open, x, 1000.0, 0.01).unwrap().final_state();
    }
    assert!((x.s - predicted).abs() < 1e-3, "{} vs {predicted}", x.s);
}

#[test]
fn syntheses_are_deterministic() {
    let (p, o, opts) = benchmark();
    assert_eq!(goldilocks(&p, &o, &opts).unwrap(), goldilocks(&p, &o, &opts).unwrap());
    assert_eq!(wms(&p, &o, &opts).unwrap(), wms(&p, &o, &opts).unwrap());
}

#[test]
fn closed_form_sdi_agrees_with_trajectory() {
    let (p, o, opts) = benchmark();
    for rep in [goldilocks(&p, &o, &opts).unwrap(), wms(&p, &o, &opts).unwrap()] {
        let closed = sdi(&rep.schedule, &p, opts.horizon).unwrap();
        assert!((closed - rep.sdi).abs() < 0.05, "{}: {closed} vs {}", rep.strategy, rep.sdi);
    }
}
