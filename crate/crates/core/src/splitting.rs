//! Execution of splitting schedules on second-order systems.
//!
//! Convention: the first entry of a [`FlowSchedule`] is applied first to the
//! state. For the palindromic schemes shipped here the distinction is moot,
//! but it matters for the non-symmetric schedules used in tests.
//!
//! FSAL (first same as last): the trailing flow of one step and the leading
//! flow of the next are of the same kind for every palindromic scheme.
//! Trailing drifts can be deferred and fused into the next leading drift;
//! trailing kicks leave the force at the final position in the carry, and
//! the next leading kick reuses it instead of evaluating `g` again.
//!
//! [`integrate`] accumulates every flow update with compensated summation.

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::schedule::{FlowKind, FlowSchedule};
use crate::scheme::{composition_schedule, SchemeCoefficients, SchemeKind, StrangKernel};
use crate::system::{SecondOrderSystem, State, StepStats};

/// Relative tolerance on `(t_final - t0) / h` being an integer.
pub const STEP_COUNT_TOL: f64 = 1e-8;

/// What one step leaves behind for the next.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum FsalCarry {
    #[default]
    None,
    /// A drift of this (already scaled) length is still owed to the state.
    Drift { tau: f64 },
    /// `g(t, y)` at the state's current position.
    Force { t: f64, y: Vec<f64>, g: Vec<f64> },
}

impl FsalCarry {
    /// Applies any pending drift, giving the true end-of-step state.
    pub fn flush(self, system: &dyn SecondOrderSystem, mut state: State) -> (State, FsalCarry) {
        match self {
            FsalCarry::Drift { tau } => {
                drift_in_place(system, tau, &mut state, None);
                (state, FsalCarry::None)
            }
            other => (state, other),
        }
    }

    pub fn is_pending_drift(&self) -> bool {
        matches!(self, FsalCarry::Drift { .. })
    }
}

/// Low-order parts lost in the state updates so far (Kahan summation).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Compensation {
    y: Vec<f64>,
    v: Vec<f64>,
    t: f64,
}

fn kahan_add(x: &mut f64, c: &mut f64, d: f64) {
    let y = d - *c;
    let s = *x + y;
    *c = (s - *x) - y;
    *x = s;
}

impl Compensation {
    fn fit(&mut self, d: usize) {
        if self.y.len() != d {
            self.y = vec![0.0; d];
            self.v = vec![0.0; d];
        }
    }

    fn add(&mut self, state: &mut State, dy: &[f64], dv: &[f64], dt: f64) {
        self.fit(state.dimension());
        for i in 0..dy.len() {
            kahan_add(&mut state.y[i], &mut self.y[i], dy[i]);
        }
        for i in 0..dv.len() {
            kahan_add(&mut state.v[i], &mut self.v[i], dv[i]);
        }
        if dt != 0.0 {
            kahan_add(&mut state.t, &mut self.t, dt);
        }
    }

    /// Folds the carried low-order parts into `state` and clears them.
    pub fn apply(&mut self, state: &mut State) {
        for (y, c) in state.y.iter_mut().zip(&self.y) {
            *y -= c;
        }
        for (v, c) in state.v.iter_mut().zip(&self.v) {
            *v -= c;
        }
        state.t -= self.t;
        *self = Compensation::default();
    }

    /// Forgets the carried parts, for when the state is overwritten.
    pub fn reset(&mut self) {
        *self = Compensation::default();
    }
}

/// Everything a stepper may keep between consecutive steps.
#[derive(Clone, Debug, Default)]
pub struct StepContext {
    pub carry: FsalCarry,
    pub compensation: Option<Compensation>,
}

impl StepContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn compensated() -> Self {
        StepContext { carry: FsalCarry::None, compensation: Some(Compensation::default()) }
    }

    /// Applies any pending drift and folds in the compensation.
    pub fn finish(&mut self, system: &dyn SecondOrderSystem, state: &mut State) {
        if let FsalCarry::Drift { tau } = std::mem::take(&mut self.carry) {
            drift_in_place(system, tau, state, self.compensation.as_mut());
        }
        if let Some(c) = self.compensation.as_mut() {
            c.apply(state);
        }
    }

    /// Adds `(dy, dv, dt)` to the state, compensated when enabled.
    pub fn add(&mut self, state: &mut State, dy: &[f64], dv: &[f64], dt: f64) {
        add_update(state, self.compensation.as_mut(), dy, dv, dt);
    }
}

pub(crate) fn add_update(state: &mut State, comp: Option<&mut Compensation>, dy: &[f64], dv: &[f64], dt: f64) {
    match comp {
        Some(c) => c.add(state, dy, dv, dt),
        None => {
            for (y, d) in state.y.iter_mut().zip(dy) {
                *y += d;
            }
            for (v, d) in state.v.iter_mut().zip(dv) {
                *v += d;
            }
            state.t += dt;
        }
    }
}

pub(crate) fn drift_in_place(
    system: &dyn SecondOrderSystem,
    tau: f64,
    state: &mut State,
    comp: Option<&mut Compensation>,
) {
    if tau == 0.0 {
        return;
    }
    let d = state.dimension();
    match system.linear_part() {
        Some(lin) => {
            let inc = lin.increment(tau, &state.y, &state.v);
            add_update(state, comp, &inc[..d], &inc[d..], tau);
        }
        None => {
            let dy: Vec<f64> = state.v.iter().map(|v| tau * v).collect();
            add_update(state, comp, &dy, &[], tau);
        }
    }
}

fn evaluate_force(system: &dyn SecondOrderSystem, state: &State, out: &mut [f64], stats: &mut StepStats) -> Result<()> {
    stats.force_evaluations += 1;
    system.force(state.t, &state.y, out)?;
    if out.iter().any(|g| !g.is_finite()) {
        return Err(Error::ForceSingularity { t: state.t, detail: format!("non-finite force at y = {:?}", state.y) });
    }
    Ok(())
}

fn apply_kick(tau: f64, g: &[f64], state: &mut State, comp: Option<&mut Compensation>) {
    let dv: Vec<f64> = g.iter().map(|gi| tau * gi).collect();
    add_update(state, comp, &[], &dv, 0.0);
}

/// Drift by `tau`: the shear `(y + tau v, v)`, or the exact linear flow when
/// the system has a linear part. The clock always advances by `tau`.
pub fn flow_drift(system: &dyn SecondOrderSystem, tau: f64, state: &State) -> State {
    let mut s = state.clone();
    drift_in_place(system, tau, &mut s, None);
    s
}

/// Kick by `tau`: `v <- v + tau g(t, y)`. A zero-length kick is skipped and
/// costs nothing.
pub fn flow_kick(system: &dyn SecondOrderSystem, tau: f64, state: &State, stats: &mut StepStats) -> Result<State> {
    let mut s = state.clone();
    if tau == 0.0 {
        return Ok(s);
    }
    let mut g = vec![0.0; s.dimension()];
    evaluate_force(system, &s, &mut g, stats)?;
    apply_kick(tau, &g, &mut s, None);
    Ok(s)
}

/// One step of `schedule` in place.
///
/// When `defer` is set and the schedule ends with a drift, that drift is left
/// in `ctx.carry` instead of being applied.
pub fn step_in_place(
    schedule: &FlowSchedule,
    system: &dyn SecondOrderSystem,
    h: f64,
    state: &mut State,
    stats: &mut StepStats,
    ctx: &mut StepContext,
    defer: bool,
) -> Result<()> {
    let entries = schedule.entries();
    let mut g = vec![0.0; state.dimension()];
    let mut start = 0;

    match std::mem::take(&mut ctx.carry) {
        FsalCarry::None => {}
        FsalCarry::Drift { tau } => {
            if entries[0].kind == FlowKind::Drift {
                drift_in_place(system, tau + entries[0].coeff * h, state, ctx.compensation.as_mut());
                stats.fsal_merges += 1;
                start = 1;
            } else {
                drift_in_place(system, tau, state, ctx.compensation.as_mut());
            }
        }
        FsalCarry::Force { t, y, g: cached } => {
            if entries[0].kind == FlowKind::Kick && t == state.t && y == state.y {
                apply_kick(entries[0].coeff * h, &cached, state, ctx.compensation.as_mut());
                stats.fsal_merges += 1;
                start = 1;
            }
        }
    }

    let last = entries.len() - 1;
    for (i, f) in entries.iter().enumerate().skip(start) {
        let tau = f.coeff * h;
        match f.kind {
            FlowKind::Drift => {
                if i == last && defer {
                    ctx.carry = FsalCarry::Drift { tau };
                } else {
                    drift_in_place(system, tau, state, ctx.compensation.as_mut());
                }
            }
            FlowKind::Kick => {
                if tau == 0.0 {
                    continue;
                }
                evaluate_force(system, state, &mut g, stats)?;
                apply_kick(tau, &g, state, ctx.compensation.as_mut());
                if i == last {
                    ctx.carry = FsalCarry::Force { t: state.t, y: state.y.clone(), g: g.clone() };
                }
            }
        }
    }
    Ok(())
}

/// One FSAL-merged step. If the schedule ends with a drift, that drift is
/// returned in the carry and is *not* yet applied to the returned state; use
/// [`FsalCarry::flush`] to obtain the exact end-of-step state.
pub fn step(
    schedule: &FlowSchedule,
    system: &dyn SecondOrderSystem,
    h: f64,
    state: &State,
    stats: &mut StepStats,
    carry: FsalCarry,
) -> Result<(State, FsalCarry)> {
    let mut s = state.clone();
    let mut ctx = StepContext { carry, compensation: None };
    step_in_place(schedule, system, h, &mut s, stats, &mut ctx, true)?;
    stats.steps_taken += 1;
    Ok((s, ctx.carry))
}

/// One step without any FSAL merging.
pub fn step_exact(
    schedule: &FlowSchedule,
    system: &dyn SecondOrderSystem,
    h: f64,
    state: &State,
    stats: &mut StepStats,
) -> Result<State> {
    let mut s = state.clone();
    step_in_place(schedule, system, h, &mut s, stats, &mut StepContext::new(), false)?;
    stats.steps_taken += 1;
    Ok(s)
}

/// Anything that advances a state by one step of size `h`.
pub trait Stepper: Send + Sync {
    /// Force evaluations per step in a long run.
    fn stages(&self) -> usize;

    /// `merge` allows the stepper to leave work in `ctx.carry` (see [`FsalCarry`]).
    fn advance(
        &self,
        system: &dyn SecondOrderSystem,
        h: f64,
        state: &mut State,
        stats: &mut StepStats,
        ctx: &mut StepContext,
        merge: bool,
    ) -> Result<()>;
}

impl Stepper for FlowSchedule {
    fn stages(&self) -> usize {
        FlowSchedule::stages(self)
    }

    fn advance(
        &self,
        system: &dyn SecondOrderSystem,
        h: f64,
        state: &mut State,
        stats: &mut StepStats,
        ctx: &mut StepContext,
        merge: bool,
    ) -> Result<()> {
        step_in_place(self, system, h, state, stats, ctx, merge)
    }
}

/// Sampled once before the first step and once after every step.
pub trait Observer {
    fn observe(&mut self, system: &dyn SecondOrderSystem, state: &State);
}

/// Wraps a closure as an [`Observer`].
pub struct FnObserver<F>(pub F);

impl<F: FnMut(&dyn SecondOrderSystem, &State)> Observer for FnObserver<F> {
    fn observe(&mut self, system: &dyn SecondOrderSystem, state: &State) {
        (self.0)(system, state)
    }
}

/// Energy error relative to the first observed value. Relative when the
/// initial energy is nonzero, absolute otherwise.
#[derive(Clone, Debug, Default)]
pub struct EnergyError {
    reference: Option<f64>,
    max: f64,
    record: bool,
    samples: Vec<(f64, f64)>,
}

impl EnergyError {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also keep every `(t, error)` sample.
    pub fn recording() -> Self {
        EnergyError { record: true, ..Self::default() }
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn reference(&self) -> Option<f64> {
        self.reference
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Largest recorded error with `lo <= t < hi`.
    pub fn max_between(&self, lo: f64, hi: f64) -> f64 {
        self.samples.iter().filter(|(t, _)| *t >= lo && *t < hi).map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn error_of(&self, energy: f64) -> f64 {
        match self.reference {
            Some(h0) if h0 != 0.0 => ((energy - h0) / h0).abs(),
            Some(h0) => (energy - h0).abs(),
            None => 0.0,
        }
    }
}

impl Observer for EnergyError {
    fn observe(&mut self, system: &dyn SecondOrderSystem, state: &State) {
        let Some(e) = system.energy(state) else { return };
        if self.reference.is_none() {
            self.reference = Some(e);
        }
        let err = if e.is_finite() { self.error_of(e) } else { f64::INFINITY };
        self.max = self.max.max(err);
        if self.record {
            self.samples.push((state.t, err));
        }
    }
}

/// Max-norm distance of the position from a reference trajectory.
pub struct PositionError<F> {
    reference: F,
    max: f64,
    last: f64,
}

impl<F: Fn(f64) -> Vec<f64>> PositionError<F> {
    pub fn new(reference: F) -> Self {
        PositionError { reference, max: 0.0, last: 0.0 }
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn last(&self) -> f64 {
        self.last
    }
}

impl<F: Fn(f64) -> Vec<f64>> Observer for PositionError<F> {
    fn observe(&mut self, _system: &dyn SecondOrderSystem, state: &State) {
        let exact = (self.reference)(state.t);
        let err = state.y.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        self.last = err;
        self.max = self.max.max(err);
    }
}

/// Keeps every `stride`-th state together with its energy error.
#[derive(Clone, Debug)]
pub struct TrajectoryRecorder {
    stride: usize,
    seen: usize,
    energy: EnergyError,
    rows: Vec<(State, f64)>,
}

impl TrajectoryRecorder {
    pub fn new(stride: usize) -> Self {
        TrajectoryRecorder { stride: stride.max(1), seen: 0, energy: EnergyError::new(), rows: Vec::new() }
    }

    pub fn rows(&self) -> &[(State, f64)] {
        &self.rows
    }

    /// Header `t,y1..yd,v1..vd,energy_err`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.rows.first().map_or(0, |(s, _)| s.dimension());
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("y{i}")));
        header.extend((1..=d).map(|i| format!("v{i}")));
        header.push("energy_err".into());
        writeln!(w, "{}", header.join(","))?;
        for (s, e) in &self.rows {
            let mut fields = vec![format!("{:e}", s.t)];
            fields.extend(s.y.iter().chain(&s.v).map(|x| format!("{x:e}")));
            fields.push(format!("{e:e}"));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

impl Observer for TrajectoryRecorder {
    fn observe(&mut self, system: &dyn SecondOrderSystem, state: &State) {
        self.energy.observe(system, state);
        if self.seen.is_multiple_of(self.stride) {
            let err = system.energy(state).map_or(f64::NAN, |e| self.energy.error_of(e));
            self.rows.push((state.clone(), err));
        }
        self.seen += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationResult {
    pub final_state: State,
    pub stats: StepStats,
    pub steps: u64,
}

/// Number of constant steps of size `h` from `t0` to `t_final`.
pub fn step_count(t0: f64, t_final: f64, h: f64) -> Result<u64> {
    if !h.is_finite() || h == 0.0 {
        return Err(Error::InvalidParameter(format!("step size must be finite and nonzero, got {h}")));
    }
    let ratio = (t_final - t0) / h;
    let n = ratio.round();
    if !ratio.is_finite() || (ratio - n).abs() > STEP_COUNT_TOL * n.abs().max(1.0) {
        return Err(Error::NonIntegerStepCount { ratio });
    }
    if n < 0.0 {
        return Err(Error::InvalidParameter(format!("step size {h} points away from t_final = {t_final}")));
    }
    Ok(n as u64)
}

/// Constant-step integration from `state0` to `t_final`.
///
/// Drift merging across steps is used only when nobody observes the
/// intermediate states; force reuse for kick-ended schedules is always on.
/// Updates are accumulated with compensated summation.
pub fn integrate(
    stepper: &dyn Stepper,
    system: &dyn SecondOrderSystem,
    h: f64,
    state0: &State,
    t_final: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<IntegrationResult> {
    let steps = step_count(state0.t, t_final, h)?;
    let merge = observers.is_empty();
    let mut stats = StepStats::default();
    let mut state = state0.clone();
    let mut ctx = StepContext::compensated();
    for o in observers.iter_mut() {
        o.observe(system, &state);
    }
    for _ in 0..steps {
        stepper.advance(system, h, &mut state, &mut stats, &mut ctx, merge)?;
        stats.steps_taken += 1;
        for o in observers.iter_mut() {
            o.observe(system, &state);
        }
    }
    ctx.finish(system, &mut state);
    Ok(IntegrationResult { final_state: state, stats, steps })
}

/// One step of the composition `S(gamma_m h) o ... o S(gamma_1 h)`.
pub fn ss_step(
    composition: &SchemeCoefficients,
    kernel: StrangKernel,
    system: &dyn SecondOrderSystem,
    h: f64,
    state: &State,
    stats: &mut StepStats,
) -> Result<State> {
    if composition.kind != SchemeKind::SsComposition {
        return Err(Error::UnsupportedKind(composition.kind.to_string()));
    }
    let schedule = composition_schedule(&composition.gammas(), kernel)?;
    step_exact(&schedule, system, h, state, stats)
}

/// `max |psi_{-h}(psi_h(x)) - x|` over `(y, v, t)`.
pub fn time_symmetry_defect(
    schedule: &FlowSchedule,
    system: &dyn SecondOrderSystem,
    h: f64,
    state: &State,
) -> Result<f64> {
    let mut stats = StepStats::default();
    let forward = step_exact(schedule, system, h, state, &mut stats)?;
    let back = step_exact(schedule, system, -h, &forward, &mut stats)?;
    Ok(back.phase_distance(state).max((back.t - state.t).abs()))
}

/// One-step Jacobian by central differences with perturbation `eps`.
pub fn step_jacobian(
    schedule: &FlowSchedule,
    system: &dyn SecondOrderSystem,
    h: f64,
    state: &State,
    eps: f64,
) -> Result<DMatrix<f64>> {
    let x = state.phase();
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut stats = StepStats::default();
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += eps;
        xm[j] -= eps;
        let fp = step_exact(schedule, system, h, &State::from_phase(&xp, state.t), &mut stats)?.phase();
        let fm = step_exact(schedule, system, h, &State::from_phase(&xm, state.t), &mut stats)?.phase();
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * eps);
        }
    }
    Ok(jac)
}

/// Canonical `[[0, I], [-I, 0]]`.
pub fn canonical_form(d: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        omega[(i, d + i)] = 1.0;
        omega[(d + i, i)] = -1.0;
    }
    omega
}

/// Induced max-norm (largest absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `|| M^T J M - J ||_inf` for the finite-difference Jacobian `M` of one step,
/// with `eps = 1e-6 max(1, |x|_inf)`.
pub fn symplecticity_defect(
    schedule: &FlowSchedule,
    system: &dyn SecondOrderSystem,
    h: f64,
    state: &State,
) -> Result<f64> {
    let eps = 1e-6 * state.phase_norm().max(1.0);
    let m = step_jacobian(schedule, system, h, state, eps)?;
    let omega = canonical_form(state.dimension());
    Ok(inf_norm(&(m.transpose() * &omega * &m - &omega)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::Flow;
    use crate::scheme::build_scheme;
    use crate::system::FnSystem;

    fn strang() -> FlowSchedule {
        build_scheme("STRANG_ABA").unwrap().unfold().unwrap()
    }

    #[test]
    fn drift_is_a_shear() {
        let sys = FnSystem::free(1);
        let s = State::new(vec![1.0], vec![2.0], 0.0);
        assert_eq!(flow_drift(&sys, 0.5, &s), State::new(vec![2.0], vec![2.0], 0.5));
        assert_eq!(flow_drift(&sys, 0.0, &s), s);
        let there = flow_drift(&sys, 0.5, &s);
        assert_eq!(flow_drift(&sys, -0.5, &there), s);
    }

    #[test]
    fn kick_pendulum_and_zero_length() {
        let sys = FnSystem::new("pendulum", 1, |_, y, out| out[0] = -y[0].sin());
        let s = State::new(vec![std::f64::consts::FRAC_PI_2], vec![1.0], 0.0);
        let mut stats = StepStats::default();
        let k = flow_kick(&sys, 0.2, &s, &mut stats).unwrap();
        assert!((k.v[0] - 0.8).abs() < 1e-15);
        assert_eq!(k.y, s.y);
        assert_eq!(stats.force_evaluations, 1);
        let z = flow_kick(&sys, 0.0, &s, &mut stats).unwrap();
        assert_eq!(z, s);
        assert_eq!(stats.force_evaluations, 1);
    }

    #[test]
    fn kick_reports_singular_force() {
        let sys = FnSystem::new("bad", 1, |_, _, out| out[0] = f64::NAN);
        let s = State::new(vec![0.0], vec![0.0], 0.0);
        let err = flow_kick(&sys, 0.1, &s, &mut StepStats::default()).unwrap_err();
        assert!(matches!(err, Error::ForceSingularity { .. }));
    }

    #[test]
    fn strang_on_harmonic_oscillator_by_hand() {
        // drift 0.05: y = 1; kick 0.1: v = -0.1; drift 0.05: y = 1 - 0.005
        let sys = FnSystem::harmonic(1, 1.0);
        let s = State::new(vec![1.0], vec![0.0], 0.0);
        let out = step_exact(&strang(), &sys, 0.1, &s, &mut StepStats::default()).unwrap();
        assert!((out.y[0] - 0.995).abs() < 1e-15);
        assert!((out.v[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn fsal_saves_one_drift_between_a17_steps() {
        let sys = FnSystem::harmonic(2, 1.0);
        let sched = build_scheme("A17").unwrap().unfold().unwrap();
        let s0 = State::new(vec![1.0, 0.0], vec![0.0, 1.0], 0.0);

        let mut plain = StepStats::default();
        let s1 = step_exact(&sched, &sys, 0.1, &s0, &mut plain).unwrap();
        let s2 = step_exact(&sched, &sys, 0.1, &s1, &mut plain).unwrap();
        assert_eq!(plain.force_evaluations, 34);
        assert_eq!(plain.fsal_merges, 0);

        let mut merged = StepStats::default();
        let (m1, c1) = step(&sched, &sys, 0.1, &s0, &mut merged, FsalCarry::None).unwrap();
        assert!(c1.is_pending_drift());
        let (m2, c2) = step(&sched, &sys, 0.1, &m1, &mut merged, c1).unwrap();
        let (m2, _) = c2.flush(&sys, m2);
        assert_eq!(merged.force_evaluations, 34);
        assert_eq!(merged.fsal_merges, 1);
        assert!(m2.phase_distance(&s2) < 1e-15);
    }

    #[test]
    fn bab_reuses_trailing_force() {
        let sys = FnSystem::harmonic(1, 1.0);
        let sched = build_scheme("B18").unwrap().unfold().unwrap();
        let s0 = State::new(vec![1.0], vec![0.0], 0.0);
        let mut stats = StepStats::default();
        let (s1, c) = step(&sched, &sys, 0.1, &s0, &mut stats, FsalCarry::None).unwrap();
        assert!(matches!(c, FsalCarry::Force { .. }));
        assert_eq!(stats.force_evaluations, 19);
        let (s2, _) = step(&sched, &sys, 0.1, &s1, &mut stats, c).unwrap();
        assert_eq!(stats.force_evaluations, 37);
        let exact = step_exact(
            &sched,
            &sys,
            0.1,
            &step_exact(&sched, &sys, 0.1, &s0, &mut StepStats::default()).unwrap(),
            &mut StepStats::default(),
        )
        .unwrap();
        assert_eq!(s2, exact);
    }

    #[test]
    fn stale_force_cache_is_ignored() {
        let sys = FnSystem::harmonic(1, 1.0);
        let sched = build_scheme("STRANG_BAB").unwrap().unfold().unwrap();
        let s0 = State::new(vec![1.0], vec![0.0], 0.0);
        let carry = FsalCarry::Force { t: 0.0, y: vec![3.0], g: vec![-3.0] };
        let mut stats = StepStats::default();
        let (s1, _) = step(&sched, &sys, 0.1, &s0, &mut stats, carry).unwrap();
        assert_eq!(stats.fsal_merges, 0);
        assert_eq!(s1, step_exact(&sched, &sys, 0.1, &s0, &mut StepStats::default()).unwrap());
    }

    #[test]
    fn integrate_zero_span_and_bad_steps() {
        let sys = FnSystem::harmonic(1, 1.0);
        let s0 = State::new(vec![1.0], vec![0.0], 2.0);
        let r = integrate(&strang(), &sys, 0.1, &s0, 2.0, &mut []).unwrap();
        assert_eq!(r.final_state, s0);
        assert_eq!(r.steps, 0);
        assert!(matches!(integrate(&strang(), &sys, 0.3, &s0, 3.0, &mut []), Err(Error::NonIntegerStepCount { .. })));
        assert!(integrate(&strang(), &sys, -0.1, &s0, 3.0, &mut []).is_err());
        assert!(integrate(&strang(), &sys, 0.0, &s0, 3.0, &mut []).is_err());
    }

    #[test]
    fn integrate_with_and_without_observers_agree() {
        let sys = FnSystem::harmonic(1, 1.0);
        let sched = build_scheme("A19").unwrap().unfold().unwrap();
        let s0 = State::new(vec![1.0], vec![0.0], 0.0);
        let quiet = integrate(&sched, &sys, 0.05, &s0, 5.0, &mut []).unwrap();
        let mut energy = EnergyError::new();
        let watched = integrate(&sched, &sys, 0.05, &s0, 5.0, &mut [&mut energy]).unwrap();
        assert_eq!(quiet.stats.force_evaluations, 100 * 19);
        assert_eq!(watched.stats.force_evaluations, 100 * 19);
        assert_eq!(quiet.stats.fsal_merges, 99);
        assert_eq!(watched.stats.fsal_merges, 0);
        assert!(quiet.final_state.phase_distance(&watched.final_state) < 1e-13);
        assert!(energy.max() < 1e-12);
    }

    #[test]
    fn ss_single_kernel_is_strang() {
        let comp = SchemeCoefficients::composition("S1", 1, 2, vec![]).unwrap();
        let sys = FnSystem::harmonic(1, 1.0);
        let s0 = State::new(vec![1.0], vec![0.3], 0.0);
        let a = ss_step(&comp, StrangKernel::Aba, &sys, 0.2, &s0, &mut StepStats::default()).unwrap();
        let b = step_exact(&strang(), &sys, 0.2, &s0, &mut StepStats::default()).unwrap();
        assert_eq!(a, b);
        assert!(ss_step(&build_scheme("A17").unwrap(), StrangKernel::Aba, &sys, 0.2, &s0, &mut StepStats::default())
            .is_err());
    }

    #[test]
    fn ss_counts_one_kick_per_kernel_and_is_exact_for_free_motion() {
        let gammas = vec!["1.3512071919596576340476878089715".parse().unwrap()];
        let comp = SchemeCoefficients::composition("TJ", 3, 4, gammas).unwrap();
        let free = FnSystem::free(2);
        let s0 = State::new(vec![1.0, -1.0], vec![0.5, 2.0], 0.0);
        let mut stats = StepStats::default();
        let out = ss_step(&comp, StrangKernel::Aba, &free, 0.3, &s0, &mut stats).unwrap();
        assert_eq!(stats.force_evaluations, 3);
        assert!((out.y[0] - 1.15).abs() < 1e-15 && (out.y[1] - (-0.4)).abs() < 1e-15);
        assert_eq!(out.v, s0.v);
    }

    #[test]
    fn trajectory_csv_header() {
        let sys = FnSystem::harmonic(2, 1.0);
        let s0 = State::new(vec![1.0, 0.0], vec![0.0, 1.0], 0.0);
        let mut rec = TrajectoryRecorder::new(5);
        integrate(&strang(), &sys, 0.1, &s0, 1.0, &mut [&mut rec]).unwrap();
        assert_eq!(rec.rows().len(), 3);
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,y1,y2,v1,v2,energy_err\n"));
        assert_eq!(text.lines().count(), 4);
    }

    fn defect_slope(sched: &FlowSchedule) -> f64 {
        let sys = FnSystem::new("pendulum", 1, |_, y, out| out[0] = -y[0].sin());
        let s0 = State::new(vec![1.0], vec![0.5], 0.0);
        let d1 = time_symmetry_defect(sched, &sys, 0.04, &s0).unwrap();
        let d2 = time_symmetry_defect(sched, &sys, 0.02, &s0).unwrap();
        assert!(d2 > 1e-12);
        (d1 / d2).log2()
    }

    // psi_{-h} psi_h - id = (1 + (-1)^(p+1)) h^(p+1) E + O(h^(p+2)) for order p
    #[test]
    fn broken_symmetry_defect_rates() {
        let second = FlowSchedule::new(vec![
            Flow { kind: FlowKind::Drift, coeff: 0.25 },
            Flow { kind: FlowKind::Kick, coeff: 2.0 / 3.0 },
            Flow { kind: FlowKind::Drift, coeff: 0.75 },
            Flow { kind: FlowKind::Kick, coeff: 1.0 / 3.0 },
        ])
        .unwrap();
        let slope = defect_slope(&second);
        assert!((slope - 4.0).abs() < 0.2, "slope {slope}");

        let first = FlowSchedule::new(vec![
            Flow { kind: FlowKind::Drift, coeff: 1.0 },
            Flow { kind: FlowKind::Kick, coeff: 1.0 },
        ])
        .unwrap();
        let slope = defect_slope(&first);
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}");

        let sys = FnSystem::new("pendulum", 1, |_, y, out| out[0] = -y[0].sin());
        let s0 = State::new(vec![1.0], vec![0.5], 0.0);
        assert!(time_symmetry_defect(&strang(), &sys, 0.04, &s0).unwrap() < 1e-15);
        assert_eq!(time_symmetry_defect(&second, &sys, 0.0, &s0).unwrap(), 0.0);
    }

    #[test]
    fn fd_jacobian_matches_leapfrog_matrix() {
        // one Strang step on y'' = -y is linear with matrix
        // [[1 - h^2/2, h - h^3/4], [-h, 1 - h^2/2]]
        let h = 0.1;
        let sys = FnSystem::harmonic(1, 1.0);
        let s0 = State::new(vec![0.7], vec![-0.2], 0.0);
        let m = step_jacobian(&strang(), &sys, h, &s0, 1e-6).unwrap();
        let exact = DMatrix::from_row_slice(2, 2, &[1.0 - h * h / 2.0, h - h * h * h / 4.0, -h, 1.0 - h * h / 2.0]);
        assert!((m - exact).abs().max() < 1e-9);
        assert!(symplecticity_defect(&strang(), &FnSystem::free(2), h, &s0_free()).unwrap() < 1e-9);
    }

    fn s0_free() -> State {
        State::new(vec![0.3, 1.0], vec![2.0, -1.0], 0.0)
    }

    #[test]
    fn reversed_palindrome_gives_identical_trajectory() {
        let sys = FnSystem::new("pendulum", 1, |_, y, out| out[0] = -y[0].sin());
        let sched = build_scheme("B19").unwrap().unfold().unwrap();
        let rev = sched.reversed();
        let s0 = State::new(vec![0.0], vec![3.0], 0.0);
        let a = integrate(&sched, &sys, 0.1, &s0, 10.0, &mut []).unwrap();
        let b = integrate(&rev, &sys, 0.1, &s0, 10.0, &mut []).unwrap();
        assert_eq!(a, b);
    }
}
