use proptest::prelude::*;

use rknsplit::problems::{
    arenstorf_return_error, corotating_to_revolving, kepler, revolving_to_corotating, three_body_fixed,
    three_body_rotating, Kepler, ARENSTORF_MU, ARENSTORF_PERIOD,
};
use rknsplit::scheme::encode;
use rknsplit::{
    build_scheme, integrate, parse_coefficients, step_exact, Extrapolation, FnSystem, SchemeRegistry, State, StepStats,
    RKN8_SCHEMES,
};

fn harmonic_error(name: &str, steps: u64) -> f64 {
    let schedule = build_scheme(name).unwrap().unfold().unwrap();
    let sys = FnSystem::harmonic(1, 1.0);
    let s0 = State::new(vec![1.0], vec![0.0], 0.0);
    let tf = 2.0;
    let r = integrate(&schedule, &sys, tf / steps as f64, &s0, tf, &mut []).unwrap();
    r.final_state.phase_distance(&State::new(vec![tf.cos()], vec![-tf.sin()], tf))
}

#[test]
fn every_scheme_is_eighth_order_on_the_oscillator() {
    for name in RKN8_SCHEMES {
        let (coarse, fine) = (harmonic_error(name, 4), harmonic_error(name, 8));
        let slope = (coarse / fine).log2();
        assert!((slope - 8.0).abs() < 0.6, "{name}: slope {slope}, errors {coarse:e} {fine:e}");
    }
}

#[test]
fn force_evaluations_match_stage_counts() {
    let inst = kepler(0.5, 1.0).unwrap();
    for name in RKN8_SCHEMES {
        let scheme = build_scheme(name).unwrap();
        let schedule = scheme.unfold().unwrap();
        let r = integrate(&schedule, inst.system.as_ref(), 0.1, &inst.initial, 5.0, &mut []).unwrap();
        let expected = 50 * schedule.stages() as u64 + u64::from(name.starts_with('B'));
        assert_eq!(r.stats.force_evaluations, expected, "{name}");
        assert_eq!(r.steps, 50);
    }
}

#[test]
fn kepler_period_closes_for_all_schemes() {
    let inst = kepler(0.5, 1.0).unwrap();
    let tf = 2.0 * std::f64::consts::PI;
    for name in RKN8_SCHEMES {
        let schedule = build_scheme(name).unwrap().unfold().unwrap();
        let r = integrate(&schedule, inst.system.as_ref(), tf / 400.0, &inst.initial, tf, &mut []).unwrap();
        let err = r.final_state.phase_distance(&inst.initial);
        assert!(err < 1e-8, "{name}: {err:e}");
        let l0 = Kepler::angular_momentum(&inst.initial);
        assert!((Kepler::angular_momentum(&r.final_state) - l0).abs() < 1e-12, "{name}");
    }
}

#[test]
fn step_then_negative_step_is_identity() {
    let inst = kepler(0.3, 1.0).unwrap();
    for name in RKN8_SCHEMES {
        let schedule = build_scheme(name).unwrap().unfold().unwrap();
        let mut stats = StepStats::default();
        let fwd = step_exact(&schedule, inst.system.as_ref(), 0.05, &inst.initial, &mut stats).unwrap();
        let back = step_exact(&schedule, inst.system.as_ref(), -0.05, &fwd, &mut stats).unwrap();
        assert!(back.phase_distance(&inst.initial) < 1e-14, "{name}");
        assert!(back.t.abs() < 1e-16);
    }
}

#[test]
fn encoded_coefficients_parse_back() {
    let reg = SchemeRegistry::builtin();
    for scheme in reg.iter() {
        let parsed = parse_coefficients(&encode(scheme), "roundtrip").unwrap();
        assert_eq!(parsed.free_coefficients(), scheme.free_coefficients(), "{}", scheme.name);
        assert_eq!(parsed.kind, scheme.kind);
        assert_eq!(parsed.stages, scheme.stages);
    }
}

#[test]
fn extrapolation_levels_improve_on_strang() {
    let inst = kepler(0.5, 1.0).unwrap();
    let tf = 2.0;
    let exact = Kepler { mu: 1.0 }.exact(0.5, tf);
    let strang = build_scheme("STRANG_ABA").unwrap().unfold().unwrap();
    let base = integrate(&strang, inst.system.as_ref(), 0.05, &inst.initial, tf, &mut []).unwrap();
    let mut last = base.final_state.phase_distance(&exact);
    for k in [2, 3, 4] {
        let ex = Extrapolation::new(k).unwrap();
        let r = integrate(&ex, inst.system.as_ref(), 0.05, &inst.initial, tf, &mut []).unwrap();
        let err = r.final_state.phase_distance(&exact);
        assert!(err < last, "{k} levels: {err:e} vs {last:e}");
        last = err;
    }
}

#[test]
fn arenstorf_orbit_closes_in_both_frames() {
    let schedule = build_scheme("A19").unwrap().unfold().unwrap();
    let steps = 16000.0;
    let rot = three_body_rotating(ARENSTORF_MU).unwrap();
    let r =
        integrate(&schedule, rot.system.as_ref(), ARENSTORF_PERIOD / steps, &rot.initial, ARENSTORF_PERIOD, &mut [])
            .unwrap();
    let e1 = arenstorf_return_error(&rot.initial, &r.final_state);
    assert!(e1 < 1e-6, "{e1:e}");

    let fixed = three_body_fixed(ARENSTORF_MU).unwrap();
    assert!(revolving_to_corotating(&rot.initial).phase_distance(&fixed.initial) < 1e-15);
    let f = integrate(
        &schedule,
        fixed.system.as_ref(),
        ARENSTORF_PERIOD / steps,
        &fixed.initial,
        ARENSTORF_PERIOD,
        &mut [],
    )
    .unwrap();
    let e2 = f.final_state.phase_distance(&fixed.initial);
    let e3 = corotating_to_revolving(&f.final_state).phase_distance(&r.final_state);
    assert!(e2 < 1e-6, "{e2:e}");
    assert!(e3 < 1e-9, "{e3:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_motion_is_exact(y in -10.0f64..10.0, v in -10.0f64..10.0, h in 0.01f64..1.0) {
        let sys = FnSystem::free(1);
        let s0 = State::new(vec![y], vec![v], 0.0);
        for name in RKN8_SCHEMES {
            let schedule = build_scheme(name).unwrap().unfold().unwrap();
            let r = integrate(&schedule, &sys, h, &s0, 10.0 * h, &mut []).unwrap();
            prop_assert!((r.final_state.y[0] - (y + 10.0 * h * v)).abs() <= 1e-12 * (1.0 + y.abs() + v.abs()));
            prop_assert_eq!(r.final_state.v[0], v);
        }
    }

    #[test]
    fn oscillator_energy_stays_close(y in -1.0f64..1.0, v in -1.0f64..1.0) {
        let sys = FnSystem::harmonic(1, 1.0);
        let schedule = build_scheme("A19").unwrap().unfold().unwrap();
        let s0 = State::new(vec![y], vec![v], 0.0);
        let r = integrate(&schedule, &sys, 0.1, &s0, 50.0, &mut []).unwrap();
        let e = |s: &State| 0.5 * (s.y[0] * s.y[0] + s.v[0] * s.v[0]);
        prop_assert!((e(&r.final_state) - e(&s0)).abs() < 1e-10);
    }
}
