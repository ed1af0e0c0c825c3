use rknsplit::splitting::integrate;
use rknsplit::State;

use crate::spec::{MethodSpec, ProblemSpec};
use crate::{BenchError, Result};

/// Errors at or below this are treated as round-off and refused by the fit.
pub const ROUNDOFF_FLOOR: f64 = f64::EPSILON;

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn estimate_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(BenchError::InsufficientData { needed: 2, got: points.len() });
    }
    for &(h, err) in points {
        if !(h.is_finite() && h > 0.0) {
            return Err(BenchError::DegenerateFit(format!("step size {h}")));
        }
        if !err.is_finite() || err <= ROUNDOFF_FLOOR {
            return Err(BenchError::DegenerateFit(format!("error {err:e} at h = {h:e} is at or below round-off")));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(BenchError::DegenerateFit("all step sizes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Fits the points whose error lies in `[lo, hi]`, taken in order of
/// decreasing `h` and only up to the first error below `lo`: beyond that
/// point the errors are round-off. Returns the slope and the number of
/// points used.
pub fn fit_in_window(points: &[(f64, f64)], lo: f64, hi: f64) -> Result<(f64, usize)> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let inside: Vec<(f64, f64)> =
        sorted.into_iter().take_while(|&(_, e)| !(e < lo)).filter(|&(_, e)| e <= hi).collect();
    Ok((estimate_order(&inside)?, inside.len()))
}

#[derive(Clone, Debug)]
pub enum Reference {
    /// Compare against a known end state.
    State(State),
    /// Compare against the same method with twice as many steps.
    Doubled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergencePoint {
    pub steps: u64,
    pub h: f64,
    /// Max-norm phase-space error.
    pub error: f64,
    pub force_evals: u64,
}

/// Integrates `problem` to `t_final` once per entry of `step_counts`.
pub fn convergence_study(
    problem: &ProblemSpec,
    method: &MethodSpec,
    t_final: f64,
    step_counts: &[u64],
    reference: &Reference,
) -> Result<Vec<ConvergencePoint>> {
    let inst = problem.instance()?;
    let span = t_final - inst.initial.t;
    let run = |n: u64| {
        integrate(method.stepper.as_ref(), inst.system.as_ref(), span / n as f64, &inst.initial, t_final, &mut [])
    };
    step_counts
        .iter()
        .map(|&n| {
            let r = run(n)?;
            let error = match reference {
                Reference::State(s) => r.final_state.phase_distance(s),
                Reference::Doubled => r.final_state.phase_distance(&run(2 * n)?.final_state),
            };
            Ok(ConvergencePoint { steps: n, h: span / n as f64, error, force_evals: r.stats.force_evaluations })
        })
        .collect()
}

/// `n0, n0 r, n0 r^2, ...` up to `n1`, rounded and deduplicated.
pub fn geometric_counts(n0: u64, n1: u64, ratio: f64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut x = n0 as f64;
    while x.round() as u64 <= n1 {
        let n = x.round() as u64;
        if out.last() != Some(&n) {
            out.push(n);
        }
        x *= ratio;
    }
    out
}
