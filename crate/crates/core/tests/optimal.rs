use sir_control::*;

fn benchmark() -> (ModelParams, EpidemiologicalObjective) {
    let p = ModelParams::benchmark();
    let o = EpidemiologicalObjective::herd_immunity(&p, 0.1).unwrap();
    (p, o)
}

fn quantized_config() -> QuantizedConfig {
    QuantizedConfig::new(vec![0.660, 1.407, 2.153, 2.900], 10.0, 270.0)
}

#[test]
fn p_opt_constraints_and_structure() {
    let (p, o) = benchmark();
    let cfg = OptConfig::new(&o);
    let rep = solve_p_opt(&p, &cfg).unwrap();
    assert!(rep.feasible, "{:?}", rep.notes);

    let wms_sdi = wms(&p, &o, &SynthesisOptions::default()).unwrap().sdi;
    assert!(rep.sdi < wms_sdi);
    assert!(rep.sdi <= rep.value("sdi_warm_start").unwrap() + 1e-6);

    rep.schedule.validate_for(&p).unwrap();
    assert!(rep.schedule.end_time().unwrap() <= cfg.t_horizon + 1e-9);

    let upto_t: Vec<&Sample> = rep.trajectory.samples.iter().filter(|x| x.t <= cfg.t_horizon + 1e-9).collect();
    let peak = upto_t.iter().map(|x| x.i).fold(0.0, f64::max);
    assert!(peak <= o.i_max + 1e-3);
    assert!((rep.value("s_at_T").unwrap() - o.s_star_target).abs() <= cfg.terminal_tol);
    // The cap is active: the solution rides I_max.
    assert!(peak >= o.i_max - 1e-3);

    // Peak riding comes first, terminal steering after it.
    let last_on_cap = upto_t.iter().rev().find(|x| (x.i - o.i_max).abs() < 1e-3).unwrap().t;
    let last_distancing = upto_t.iter().rev().find(|x| x.r < p.r_bar - 1e-3).unwrap().t;
    assert!(last_on_cap < last_distancing, "{last_on_cap} vs {last_distancing}");
}

#[test]
fn quantized_benchmark_schedule() {
    let (p, o) = benchmark();
    let cfg = quantized_config();
    let rep = solve_quantized(&p, &cfg, &o).unwrap();
    assert!(rep.feasible);
    assert!(rep.sdi <= 215.0);
    for seg in rep.schedule.segments() {
        let ControlLaw::Constant(r) = seg.law else {
            panic!("quantized schedules are piecewise constant");
        };
        assert!(cfg.levels.contains(&r));
        assert!((seg.start / 10.0).fract().abs() < 1e-9 && (seg.end / 10.0).fract().abs() < 1e-9);
    }

    let again = solve_quantized(&p, &cfg, &o).unwrap();
    assert_eq!(rep.schedule, again.schedule);
}

#[test]
fn quantized_can_demand_quasi_steady_state() {
    let (p, o) = benchmark();
    let mut cfg = quantized_config();
    cfg.require_qss = true;
    let rep = solve_quantized(&p, &cfg, &o).unwrap();
    assert!(rep.value("i_at_T").unwrap() < 1e-5);
    assert!((rep.s_inf - o.s_star_target).abs() < 2e-3);
    let free = solve_quantized(&p, &quantized_config(), &o).unwrap();
    assert!(free.sdi < rep.sdi);
}

#[test]
fn weighted_variant_misses_one_objective() {
    let (p, o) = benchmark();
    for alpha_r in [0.20, 0.25, 0.30, 0.35, 0.40] {
        let rep = solve_weighted(&p, &o, &WeightedConfig::new(1.0, alpha_r)).unwrap();
        let both = rep.ipp <= o.i_max + 1e-3 && (rep.s_inf - o.s_star_target).abs() <= 0.01;
        assert!(!both, "alpha_r = {alpha_r}");
        rep.schedule.validate_for(&p).unwrap();
    }
}

#[test]
fn weighted_variant_distances_when_infection_is_expensive() {
    let (p, o) = benchmark();
    let mut cfg = WeightedConfig::new(100.0, 0.25);
    cfg.max_iters = 60;
    let rep = solve_weighted(&p, &o, &cfg).unwrap();
    assert!(rep.sdi > 0.0);
    let open = simulate(&p, &ControlSchedule::open_loop(), p.initial_state(), 270.0, 0.05).unwrap();
    let open_cost: f64 = 100.0
        * open
            .samples
            .windows(2)
            .map(|w| 0.5 * (w[0].i + w[1].i) * (w[1].t - w[0].t))
            .sum::<f64>();
    assert!(rep.value("weighted_objective").unwrap() < 0.5 * open_cost);
}
