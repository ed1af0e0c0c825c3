use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rknsplit::problems::arenstorf_return_error;
use rknsplit::splitting::{integrate, EnergyError};

use crate::spec::{MethodSpec, ProblemSpec};
use crate::{BenchError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub scheme: String,
    pub problem: String,
    pub parameter: f64,
    pub h: f64,
    pub stages: usize,
    /// Force evaluations per unit time, `stages / h`.
    pub cost: f64,
    pub force_evals: u64,
    pub max_energy_err: f64,
    pub final_pos_err: Option<f64>,
    pub status: String,
    pub wall_time_s: f64,
}

impl BenchmarkRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SweepConfig {
    /// Worker threads; zero means one per core.
    pub workers: usize,
}

impl SweepConfig {
    fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || n == 0 {
        return Err(BenchError::BadArgument(format!("log grid needs 0 < lo <= hi and n > 0, got {lo}:{hi}:{n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { hi } else { lo * (step * i as f64).exp() }).collect())
}

/// Step count for a target cost, rounded so that `t_final / h` is whole.
pub fn commensurate_steps(t_final: f64, cost: f64, stages: usize) -> u64 {
    ((t_final * cost / stages as f64).round() as u64).max(1)
}

/// Integrates one cell. Failures are recorded, not raised.
pub fn run_cell(problem: &ProblemSpec, method: &MethodSpec, steps: u64, t_final: f64) -> BenchmarkRecord {
    let stages = method.stages();
    let h = t_final / steps as f64;
    let mut record = BenchmarkRecord {
        scheme: method.name.clone(),
        problem: problem.name().to_string(),
        parameter: problem.parameter(),
        h,
        stages,
        cost: stages as f64 / h,
        force_evals: 0,
        max_energy_err: f64::NAN,
        final_pos_err: None,
        status: "ok".into(),
        wall_time_s: 0.0,
    };
    let start = Instant::now();
    let outcome = problem.instance().and_then(|inst| {
        let mut energy = EnergyError::new();
        let r =
            integrate(method.stepper.as_ref(), inst.system.as_ref(), h, &inst.initial, t_final, &mut [&mut energy])?;
        Ok((inst, energy, r))
    });
    record.wall_time_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok((inst, energy, r)) => {
            record.force_evals = r.stats.force_evaluations;
            record.max_energy_err = energy.max();
            record.final_pos_err = match problem {
                ProblemSpec::ThreeBodyRotating { .. } => Some(arenstorf_return_error(&inst.initial, &r.final_state)),
                _ => problem
                    .exact(r.final_state.t)
                    .map(|exact| exact.y.iter().zip(&r.final_state.y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)),
            };
            if !r.final_state.is_finite() || !record.max_energy_err.is_finite() {
                record.status = "failed: overflow".into();
            }
        }
        Err(e) => record.status = format!("failed: {e}"),
    }
    record
}

/// One record per `(scheme, cost)`, in that order.
pub fn run_sweep(
    problem: &ProblemSpec,
    methods: &[MethodSpec],
    costs: &[f64],
    t_final: f64,
    config: SweepConfig,
) -> Result<Vec<BenchmarkRecord>> {
    if let Some(c) = costs.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(BenchError::BadArgument(format!("costs must be positive, got {c}")));
    }
    let cells: Vec<(&MethodSpec, u64)> = methods
        .iter()
        .flat_map(|m| costs.iter().map(move |&c| (m, commensurate_steps(t_final, c, m.stages()))))
        .collect();
    Ok(config.run(|| cells.par_iter().map(|&(m, n)| run_cell(problem, m, n, t_final)).collect()))
}

/// One record per `(scheme, parameter)` at a fixed cost.
pub fn parameter_scan(
    family: &ProblemSpec,
    methods: &[MethodSpec],
    parameters: &[f64],
    cost: f64,
    t_final: f64,
    config: SweepConfig,
) -> Result<Vec<BenchmarkRecord>> {
    if !(cost > 0.0 && cost.is_finite()) {
        return Err(BenchError::BadArgument(format!("cost must be positive, got {cost}")));
    }
    let cells: Vec<(&MethodSpec, ProblemSpec)> =
        methods.iter().flat_map(|m| parameters.iter().map(move |&p| (m, family.with_parameter(p)))).collect();
    Ok(config.run(|| {
        cells.par_iter().map(|(m, p)| run_cell(p, m, commensurate_steps(t_final, cost, m.stages()), t_final)).collect()
    }))
}

/// One Arenstorf period per entry of `steps_per_period`; `final_pos_err`
/// holds the max-norm return error in phase space.
pub fn arenstorf_run(
    method: &MethodSpec,
    steps_per_period: &[u64],
    mu: f64,
    config: SweepConfig,
) -> Result<Vec<BenchmarkRecord>> {
    let problem = ProblemSpec::ThreeBodyRotating { mu };
    let period = problem.instance()?.invariant_refs.period.expect("Arenstorf period");
    Ok(config.run(|| steps_per_period.par_iter().map(|&n| run_cell(&problem, method, n.max(1), period)).collect()))
}

pub fn write_records<W: Write>(records: &[BenchmarkRecord], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record([
        "scheme",
        "problem",
        "parameter",
        "h",
        "stages",
        "cost",
        "force_evals",
        "max_energy_err",
        "final_pos_err",
        "status",
        "wall_time_s",
    ])?;
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<BenchmarkRecord>> {
    csv::Reader::from_reader(r).deserialize().map(|row| row.map_err(BenchError::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rknsplit::SchemeRegistry;

    fn methods(names: &[&str]) -> Vec<MethodSpec> {
        let reg = SchemeRegistry::builtin();
        names.iter().map(|n| MethodSpec::resolve(n, &reg).unwrap()).collect()
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(10.0, 1000.0, 3).unwrap();
        assert_eq!(g[0], 10.0);
        assert!((g[1] - 100.0).abs() < 1e-12);
        assert_eq!(g[2], 1000.0);
        assert_eq!(log_grid(5.0, 9.0, 1).unwrap(), vec![5.0]);
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn cost_accounting() {
        let kepler = ProblemSpec::Kepler { e: 0.5, mu: 1.0 };
        let recs = run_sweep(&kepler, &methods(&["A17", "B18"]), &[340.0], 10.0, SweepConfig::default()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].scheme, "A17");
        let steps = (10.0 / recs[0].h).round() as u64;
        assert_eq!(steps, 200);
        assert_eq!(recs[0].force_evals, 17 * steps);
        assert!((recs[0].cost - 17.0 / recs[0].h).abs() < 1e-9);
        // kick-first schedules pay one priming evaluation
        let steps = (10.0 / recs[1].h).round() as u64;
        assert_eq!(recs[1].force_evals, 18 * steps + 1);
        assert!(recs.iter().all(|r| r.is_ok() && r.final_pos_err.is_some()));
    }

    #[test]
    fn empty_and_single() {
        let p = ProblemSpec::Pendulum { alpha: 3.0 };
        assert!(run_sweep(&p, &[], &[100.0], 5.0, SweepConfig::default()).unwrap().is_empty());
        let one = run_sweep(&p, &methods(&["A19"]), &[100.0], 5.0, SweepConfig::default()).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].final_pos_err.is_none());
        assert!(run_sweep(&p, &methods(&["A19"]), &[-1.0], 5.0, SweepConfig::default()).is_err());
    }

    #[test]
    fn scan_matches_sweep() {
        let k = ProblemSpec::Kepler { e: 0.0, mu: 1.0 };
        let m = methods(&["A17"]);
        let scan = parameter_scan(&k, &m, &[0.0, 0.3], 340.0, 20.0, SweepConfig { workers: 2 }).unwrap();
        let sweep = run_sweep(&k, &m, &[340.0], 20.0, SweepConfig::default()).unwrap();
        assert_eq!(scan[0].max_energy_err, sweep[0].max_energy_err);
        assert_eq!(scan[0].force_evals, sweep[0].force_evals);
        assert_eq!(scan[1].parameter, 0.3);
    }

    #[test]
    fn singular_runs_are_marked() {
        let p = ProblemSpec::Kepler { e: 0.0, mu: 1.0 };
        let mut bad = run_cell(&p.with_parameter(1.5), &methods(&["A17"])[0], 10, 1.0);
        assert!(bad.status.starts_with("failed"));
        bad.wall_time_s = 0.0;
        let mut buf = Vec::new();
        write_records(&[bad.clone()], &mut buf).unwrap();
        let back = read_records(&buf[..]).unwrap();
        assert_eq!(back[0].status, bad.status);
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let p = ProblemSpec::HenonHeiles { alpha: 0.5 };
        let recs = run_sweep(&p, &methods(&["A18", "EXTRAP6"]), &[60.0, 120.0], 5.0, SweepConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "scheme,problem,parameter,h,stages,cost,force_evals,max_energy_err,final_pos_err,status,wall_time_s\n"
        ));
        assert_eq!(read_records(&buf[..]).unwrap(), recs);
    }
}
