use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;

use rknsplit::problems::{self, HenonHeiles, Kepler, Pendulum, ThreeBodyFixed, ARENSTORF_MU};
use rknsplit::schrodinger::{evolve_sampled, initial_gaussian, poschl_teller_potential, Evolution, SpatialGrid};
use rknsplit::splitting::{integrate, symplecticity_defect, time_symmetry_defect, EnergyError};
use rknsplit::{
    build_scheme, coefficient_norms, FlowKind, FnSystem, SchemeRegistry, SecondOrderSystem, State, StepStats,
    RKN8_SCHEMES,
};
use rknsplit_bench::{
    arenstorf_run, commensurate_steps, convergence_study, fit_in_window, geometric_counts, MethodSpec, ProblemSpec,
    Reference, SweepConfig,
};

use crate::oracles::{fd_gradient, growth_exponent, taylor_expm};
use crate::{Check, Criterion};

pub const COEFF_SUM_TOL: f64 = 1e-14;
pub const NORM_TABLE_TOL: f64 = 0.01;
/// `(name, Delta, delta, arg-max label)` as published.
pub const NORM_TABLE: [(&str, f64, f64, &str); 6] = [
    ("A17", 8.42, 0.5459, "a9"),
    ("A18", 7.42, 0.6406, "a9"),
    ("A19", 5.98, 0.4237, "a4"),
    ("B17", 8.93, 0.6355, "a5"),
    ("B18", 9.68, 0.9303, "a4"),
    ("B19", 6.94, 0.5238, "a6"),
];

pub const ORDER_WINDOW: (f64, f64) = (1e-12, 1e-6);
pub const ORDER_TOL: f64 = 0.5;
pub const ORDER_RUNTIME_S: f64 = 60.0;

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const SYMPLECTIC_TOL: f64 = 1e-5;
pub const GEOMETRY_H: f64 = 0.01;

pub const LONG_RUN_TF: f64 = 1000.0;
pub const LONG_RUN_COST: f64 = 340.0;
pub const HALVES_RATIO: f64 = 2.0;

/// Growth exponent above which an error counts as drifting.
pub const DRIFT_EXPONENT: f64 = 0.5;
pub const DRIFT_WINDOW: (f64, f64) = (100.0, 1000.0);

pub const ARENSTORF_TARGET: f64 = 1e-8;
pub const ARENSTORF_WINDOW: (f64, f64) = (1e-10, 1e-6);
pub const ARENSTORF_STEPS: (u64, u64) = (1000, 64000);

pub const QUANTUM_N: usize = 256;
pub const QUANTUM_DEPTH: f64 = 10.0;
pub const QUANTUM_TF: f64 = 1000.0;
pub const QUANTUM_NORM_TOL: f64 = 1e-12;
/// Fixed step of the norm and energy checks.
pub const QUANTUM_H: f64 = 0.125;
/// Self-convergence steps, each compared with its half.
pub const QUANTUM_STEPS: [f64; 4] = [0.25, 0.125, 0.0625, 0.03125];
pub const QUANTUM_WINDOW: (f64, f64) = (1e-10, 1e-4);

pub const TAYLOR_TOL: f64 = 1e-13;
pub const GRADIENT_TOL: f64 = 1e-7;
pub const STRANG_TOL: f64 = 1e-15;

fn run(name: &'static str, body: impl FnOnce(&mut Vec<Check>)) -> Criterion {
    let start = Instant::now();
    let mut checks = Vec::new();
    body(&mut checks);
    Criterion { name, checks, elapsed: start.elapsed() }
}

fn kepler() -> ProblemSpec {
    ProblemSpec::Kepler { e: 0.5, mu: 1.0 }
}

fn method(name: &str) -> Result<MethodSpec, String> {
    MethodSpec::resolve(name, &SchemeRegistry::builtin()).map_err(|e| e.to_string())
}

pub fn coefficient_fidelity() -> Criterion {
    run("coefficient fidelity", |checks| {
        for (name, big, small, label) in NORM_TABLE {
            let scheme = match build_scheme(name) {
                Ok(s) => s,
                Err(e) => return checks.push(Check::failed(name, e)),
            };
            match scheme.unfold() {
                Ok(schedule) => {
                    for kind in [FlowKind::Drift, FlowKind::Kick] {
                        let sum: f64 = schedule.entries().iter().filter(|f| f.kind == kind).map(|f| f.coeff).sum();
                        let which = if kind == FlowKind::Drift { "a" } else { "b" };
                        checks.push(Check::at_most(format!("{name} {which}-sum"), (sum - 1.0).abs(), COEFF_SUM_TOL));
                    }
                }
                Err(e) => checks.push(Check::failed(format!("{name} unfold"), e)),
            }
            let norms = coefficient_norms(&scheme);
            checks.push(Check::near(format!("{name} Delta"), norms.delta_1, big, NORM_TABLE_TOL));
            checks.push(Check::near(format!("{name} delta"), norms.delta_max, small, NORM_TABLE_TOL));
            checks.push(Check::new(
                format!("{name} arg-max"),
                norms.argmax == label,
                format!("|{}| vs |{label}|", norms.argmax),
            ));
        }
    })
}

pub fn order_eight() -> Criterion {
    run("order 8 on Kepler", |checks| {
        let start = Instant::now();
        let problem = kepler();
        let Some(exact) = problem.exact(2.0 * PI) else {
            return checks.push(Check::failed("reference", "no exact solution"));
        };
        let counts = geometric_counts(16, 1024, 2f64.powf(0.25));
        let targets = RKN8_SCHEMES.iter().map(|n| (n.to_string(), 8.0)).chain([
            ("EXTRAP4".to_string(), 4.0),
            ("EXTRAP6".to_string(), 6.0),
            ("EXTRAP8".to_string(), 8.0),
        ]);
        for (name, target) in targets {
            let fitted = method(&name).and_then(|m| {
                let pts = convergence_study(&problem, &m, 2.0 * PI, &counts, &Reference::State(exact.clone()))
                    .map_err(|e| e.to_string())?;
                let pairs: Vec<(f64, f64)> = pts.iter().map(|p| (p.h, p.error)).collect();
                fit_in_window(&pairs, ORDER_WINDOW.0, ORDER_WINDOW.1).map_err(|e| e.to_string())
            });
            match fitted {
                Ok((slope, used)) => {
                    let mut c = Check::near(format!("{name} slope"), slope, target, ORDER_TOL);
                    c.detail.push_str(&format!(" ({used} points)"));
                    checks.push(c);
                }
                Err(e) => checks.push(Check::failed(format!("{name} slope"), e)),
            }
        }
        checks.push(Check::at_most("runtime [s]", start.elapsed().as_secs_f64(), ORDER_RUNTIME_S));
    })
}

pub fn geometric_properties() -> Criterion {
    run("geometric properties", |checks| {
        let cases = [("Kepler", problems::kepler(0.5, 1.0)), ("Henon-Heiles", problems::henon_heiles(1.0))];
        for (pname, inst) in cases {
            let inst = match inst {
                Ok(i) => i,
                Err(e) => return checks.push(Check::failed(pname, e)),
            };
            for name in RKN8_SCHEMES {
                let Ok(schedule) = build_scheme(name).and_then(|s| s.unfold()) else {
                    checks.push(Check::failed(format!("{name} {pname}"), "cannot build schedule"));
                    continue;
                };
                let sys = inst.system.as_ref();
                match time_symmetry_defect(&schedule, sys, GEOMETRY_H, &inst.initial) {
                    Ok(d) => checks.push(Check::at_most(format!("{name} {pname} time symmetry"), d, SYMMETRY_TOL)),
                    Err(e) => checks.push(Check::failed(format!("{name} {pname} time symmetry"), e)),
                }
                match symplecticity_defect(&schedule, sys, GEOMETRY_H, &inst.initial) {
                    Ok(d) => checks.push(Check::at_most(format!("{name} {pname} symplecticity"), d, SYMPLECTIC_TOL)),
                    Err(e) => checks.push(Check::failed(format!("{name} {pname} symplecticity"), e)),
                }
            }
        }
    })
}

/// Energy error samples of a Kepler run at `LONG_RUN_COST`.
fn long_kepler_run(name: &str) -> Result<EnergyError, String> {
    let m = method(name)?;
    let inst = kepler().instance().map_err(|e| e.to_string())?;
    let steps = commensurate_steps(LONG_RUN_TF, LONG_RUN_COST, m.stages());
    let mut energy = EnergyError::recording();
    integrate(
        m.stepper.as_ref(),
        inst.system.as_ref(),
        LONG_RUN_TF / steps as f64,
        &inst.initial,
        LONG_RUN_TF,
        &mut [&mut energy],
    )
    .map_err(|e| e.to_string())?;
    Ok(energy)
}

fn halves(energy: &EnergyError) -> (f64, f64) {
    let mid = LONG_RUN_TF / 2.0;
    (energy.max_between(0.0, mid), energy.max_between(mid, f64::INFINITY))
}

pub fn no_energy_drift() -> Criterion {
    run("no energy drift", |checks| {
        for name in ["A17", "A19", "B17"] {
            match long_kepler_run(name) {
                Ok(energy) => {
                    let (first, second) = halves(&energy);
                    checks.push(Check::new(
                        format!("{name} halves"),
                        second <= HALVES_RATIO * first,
                        format!("second {second:.3e} vs first {first:.3e}"),
                    ));
                }
                Err(e) => checks.push(Check::failed(name, e)),
            }
        }
    })
}

pub fn extrapolation() -> Criterion {
    run("extrapolation stages and drift", |checks| {
        let inst = match kepler().instance() {
            Ok(i) => i,
            Err(e) => return checks.push(Check::failed("Kepler", e)),
        };
        for (name, cost) in [("EXTRAP4", 3u64), ("EXTRAP6", 6), ("EXTRAP8", 10)] {
            let counted = method(name).and_then(|m| {
                let r = integrate(m.stepper.as_ref(), inst.system.as_ref(), 0.05, &inst.initial, 5.0, &mut [])
                    .map_err(|e| e.to_string())?;
                Ok((m.stages() as u64, r.stats.force_evaluations, r.steps))
            });
            match counted {
                Ok((stages, evals, steps)) => checks.push(Check::new(
                    format!("{name} cost"),
                    stages == cost && evals == cost * steps,
                    format!("{stages} per step, {evals} over {steps} steps, expected {cost}"),
                )),
                Err(e) => checks.push(Check::failed(format!("{name} cost"), e)),
            }
        }
        match long_kepler_run("A19") {
            Ok(energy) => {
                let (first, second) = halves(&energy);
                checks.push(Check::new(
                    "A19 bounded",
                    second <= HALVES_RATIO * first,
                    format!("second {second:.3e} vs first {first:.3e}"),
                ));
            }
            Err(e) => checks.push(Check::failed("A19 bounded", e)),
        }
        for name in ["EXTRAP4", "EXTRAP6", "EXTRAP8"] {
            match long_kepler_run(name) {
                Ok(energy) => {
                    let p = growth_exponent(energy.samples(), DRIFT_WINDOW.0, DRIFT_WINDOW.1);
                    checks.push(Check::new(
                        format!("{name} drifts"),
                        p >= DRIFT_EXPONENT,
                        format!("growth exponent {p:.3} >= {DRIFT_EXPONENT}"),
                    ));
                    checks.push(Check::new(
                        format!("{name} superlinear"),
                        p > 1.0,
                        format!("growth exponent {p:.3} > 1"),
                    ));
                }
                Err(e) => checks.push(Check::failed(format!("{name} drift"), e)),
            }
        }
    })
}

pub fn arenstorf_closure() -> Criterion {
    run("Arenstorf closure", |checks| {
        let counts = geometric_counts(ARENSTORF_STEPS.0, ARENSTORF_STEPS.1, 2f64.sqrt());
        let records = match method("A19")
            .and_then(|m| arenstorf_run(&m, &counts, ARENSTORF_MU, SweepConfig::default()).map_err(|e| e.to_string()))
        {
            Ok(r) => r,
            Err(e) => return checks.push(Check::failed("A19 runs", e)),
        };
        let pairs: Vec<(f64, f64)> = records.iter().filter_map(|r| r.final_pos_err.map(|e| (r.h, e))).collect();
        let best = pairs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        checks.push(Check::at_most("best return error", best, ARENSTORF_TARGET));
        match fit_in_window(&pairs, ARENSTORF_WINDOW.0, ARENSTORF_WINDOW.1) {
            Ok((slope, used)) => {
                let mut c = Check::near("pre-round-off slope", slope, 8.0, ORDER_TOL);
                c.detail.push_str(&format!(" ({used} points)"));
                checks.push(c);
            }
            Err(e) => checks.push(Check::failed("pre-round-off slope", e)),
        }
    })
}

fn quantum_run(name: &str, h: f64) -> Result<Evolution, String> {
    let schedule = build_scheme(name).and_then(|s| s.unfold()).map_err(|e| e.to_string())?;
    let grid = SpatialGrid::new(-8.0, 8.0, QUANTUM_N).map_err(|e| e.to_string())?;
    let v = poschl_teller_potential(&grid, QUANTUM_DEPTH);
    evolve_sampled(&schedule, &v, &initial_gaussian(&grid), h, QUANTUM_TF, 8).map_err(|e| e.to_string())
}

pub fn schrodinger() -> Criterion {
    run("Schrodinger", |checks| {
        for name in RKN8_SCHEMES {
            match quantum_run(name, QUANTUM_H) {
                Ok(run) => {
                    checks.push(Check::at_most(format!("{name} norm"), run.max_norm_err(), QUANTUM_NORM_TOL));
                    let mid = QUANTUM_TF / 2.0;
                    let (first, second) =
                        (run.max_energy_err_between(0.0, mid), run.max_energy_err_between(mid, f64::INFINITY));
                    checks.push(Check::new(
                        format!("{name} energy halves"),
                        second <= HALVES_RATIO * first,
                        format!("second {second:.3e} vs first {first:.3e}"),
                    ));
                }
                Err(e) => checks.push(Check::failed(name, e)),
            }
        }
        let mut finals = Vec::new();
        for h in QUANTUM_STEPS.iter().copied().chain([QUANTUM_STEPS[QUANTUM_STEPS.len() - 1] / 2.0]) {
            match quantum_run("A19", h) {
                Ok(run) => finals.push((h, run.final_state)),
                Err(e) => return checks.push(Check::failed(format!("A19 h = {h}"), e)),
            }
        }
        let pairs: Vec<(f64, f64)> = finals.windows(2).map(|w| (w[0].0, w[0].1.distance(&w[1].1))).collect();
        match fit_in_window(&pairs, QUANTUM_WINDOW.0, QUANTUM_WINDOW.1) {
            Ok((slope, used)) => {
                let mut c = Check::near("A19 self-convergence", slope, 8.0, ORDER_TOL);
                c.detail.push_str(&format!(" ({used} points)"));
                checks.push(c);
            }
            Err(e) => checks.push(Check::failed("A19 self-convergence", e)),
        }
    })
}

/// Central-difference gradient check of `g = -grad V` at `points`.
fn gradient_gap(system: &dyn SecondOrderSystem, points: &[Vec<f64>]) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for y in points {
        let mut g = vec![0.0; y.len()];
        system.force(0.0, y, &mut g).map_err(|e| e.to_string())?;
        if system.potential(0.0, y).is_none() {
            return Err(format!("{} has no potential", system.name()));
        }
        let grad = fd_gradient(|p| system.potential(0.0, p).unwrap_or(f64::NAN), y, 1e-5);
        for (gi, di) in g.iter().zip(&grad) {
            worst = worst.max((gi + di).abs());
        }
    }
    Ok(worst)
}

pub fn oracle_equivalences() -> Criterion {
    run("oracle equivalences", |checks| {
        let fixed = ThreeBodyFixed::new(ARENSTORF_MU);
        match fixed.linear_part() {
            Some(lin) => {
                // y' = v, v' = y + alpha v with alpha = [[0, 2], [-2, 0]]
                let generator = DMatrix::from_row_slice(
                    4,
                    4,
                    &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 2.0, 0.0, 1.0, -2.0, 0.0],
                );
                let mut worst = 0.0f64;
                for tau in [0.01, 0.1, 0.25, 0.5, -0.3, 1.0] {
                    let oracle = taylor_expm(&(&generator * tau), 30);
                    worst = worst.max((lin.propagator(tau).as_ref() - oracle).abs().max());
                }
                checks.push(Check::at_most("three-body propagator vs Taylor", worst, TAYLOR_TOL));
            }
            None => checks.push(Check::failed("three-body propagator vs Taylor", "no linear part")),
        }

        let cases: [(&str, Box<dyn SecondOrderSystem>, Vec<Vec<f64>>); 4] = [
            ("Kepler", Box::new(Kepler { mu: 1.0 }), vec![vec![0.5, 0.0], vec![-0.3, 1.1], vec![1.7, -0.4]]),
            ("pendulum", Box::new(Pendulum), vec![vec![0.0], vec![1.2], vec![-2.9], vec![7.0]]),
            ("Henon-Heiles", Box::new(HenonHeiles), vec![vec![0.5, 0.0], vec![-0.2, 0.35], vec![0.1, -0.6]]),
            (
                "three-body fixed frame",
                Box::new(ThreeBodyFixed::new(ARENSTORF_MU)),
                vec![vec![0.5, 0.5], vec![0.3, -0.4], vec![-0.5, -0.2], vec![1.4, 0.3]],
            ),
        ];
        for (name, system, points) in cases {
            match gradient_gap(system.as_ref(), &points) {
                Ok(gap) => checks.push(Check::at_most(format!("{name} force vs -grad V"), gap, GRADIENT_TOL)),
                Err(e) => checks.push(Check::failed(format!("{name} force vs -grad V"), e)),
            }
        }

        let strang = build_scheme("STRANG_ABA").and_then(|s| s.unfold()).and_then(|sched| {
            let s0 = State::new(vec![1.0], vec![0.0], 0.0);
            rknsplit::step_exact(&sched, &FnSystem::harmonic(1, 1.0), 0.1, &s0, &mut StepStats::default())
        });
        match strang {
            Ok(s) => {
                let gap = (s.y[0] - 0.995).abs().max((s.v[0] + 0.1).abs());
                checks.push(Check::at_most("Strang step vs (0.995, -0.1)", gap, STRANG_TOL));
            }
            Err(e) => checks.push(Check::failed("Strang step", e)),
        }
    })
}

/// Every criterion, in a fixed order.
pub const ALL: [fn() -> Criterion; 8] = [
    coefficient_fidelity,
    order_eight,
    geometric_properties,
    no_energy_drift,
    extrapolation,
    arenstorf_closure,
    schrodinger,
    oracle_equivalences,
];
