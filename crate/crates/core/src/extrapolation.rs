//! Extrapolation of a symmetric second-order kernel with the harmonic
//! sequence `1, 2, ..., k`, giving a method of order `2k`.
//!
//! The combination is formed on increments `y^(l) - y_n` rather than on the
//! end states themselves, which keeps the large common part of the state out
//! of the weighted sum.

use crate::error::{Error, Result};
use crate::schedule::{FlowKind, FlowSchedule};
use crate::scheme::{composition_schedule, StrangKernel};
use crate::splitting::{add_update, drift_in_place, step_in_place, Compensation, FsalCarry, StepContext, Stepper};
use crate::system::{SecondOrderSystem, State, StepStats};

pub const LEVELS: [usize; 3] = [2, 3, 4];

/// Weights `alpha_l` for the level-`k` combination, as exact fractions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtrapolationTableau {
    pub k: usize,
    /// `(numerator, denominator)` in lowest terms, denominator positive.
    pub weights: Vec<(i64, i64)>,
}

impl ExtrapolationTableau {
    pub fn order(&self) -> usize {
        2 * self.k
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|&(n, d)| n as f64 / d as f64).collect()
    }

    /// Sum of the weights as a reduced fraction.
    pub fn weight_sum(&self) -> (i64, i64) {
        self.weights.iter().fold((0, 1), |(an, ad), &(n, d)| reduce(an * d + n * ad, ad * d))
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn reduce(n: i64, d: i64) -> (i64, i64) {
    let g = gcd(n, d).max(1);
    let s = if d < 0 { -1 } else { 1 };
    (s * n / g, s * d / g)
}

/// `alpha_l = prod_{m != l} l^2 / (l^2 - m^2)`, the Lagrange weights at zero
/// for nodes `(1/l)^2`.
pub fn tableau(k: usize) -> Result<ExtrapolationTableau> {
    if !LEVELS.contains(&k) {
        return Err(Error::UnsupportedLevel(k));
    }
    let weights = (1..=k as i64)
        .map(|l| (1..=k as i64).filter(|&m| m != l).fold((1, 1), |(n, d), m| reduce(n * l * l, d * (l * l - m * m))))
        .collect();
    Ok(ExtrapolationTableau { k, weights })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CombineForm {
    /// `y_n + sum alpha_l (y^(l) - y_n)`.
    #[default]
    Increment,
    /// `sum alpha_l y^(l)`.
    Direct,
}

/// A level-`k` extrapolation method usable wherever a [`Stepper`] is.
#[derive(Clone, Debug)]
pub struct Extrapolation {
    tableau: ExtrapolationTableau,
    weights: Vec<f64>,
    kernel: FlowSchedule,
    form: CombineForm,
}

impl Extrapolation {
    /// Level `k` over the ABA Strang kernel.
    pub fn new(k: usize) -> Result<Self> {
        Self::with_kernel(k, StrangKernel::Aba)
    }

    pub fn with_kernel(k: usize, kernel: StrangKernel) -> Result<Self> {
        Self::with_schedule(k, composition_schedule(&[1.0], kernel)?)
    }

    /// Any symmetric second-order schedule may serve as the kernel.
    pub fn with_schedule(k: usize, kernel: FlowSchedule) -> Result<Self> {
        let tableau = tableau(k)?;
        let weights = tableau.weights_f64();
        Ok(Extrapolation { tableau, weights, kernel, form: CombineForm::Increment })
    }

    pub fn with_form(mut self, form: CombineForm) -> Self {
        self.form = form;
        self
    }

    pub fn tableau(&self) -> &ExtrapolationTableau {
        &self.tableau
    }

    pub fn kernel(&self) -> &FlowSchedule {
        &self.kernel
    }

    /// Force evaluations per step: `k(k+1)/2` kicks for a drift-first
    /// kernel, one more for a kick-first kernel (the shared initial force).
    pub fn evaluations_per_step(&self) -> usize {
        let k = self.tableau.k;
        let shared = usize::from(self.kernel.first_kind() == FlowKind::Kick);
        k * (k + 1) / 2 * self.kernel.stages() + shared
    }

    pub fn step(&self, system: &dyn SecondOrderSystem, h: f64, state: &State, stats: &mut StepStats) -> Result<State> {
        let mut s = state.clone();
        self.step_in_place(system, h, &mut s, stats, None)?;
        Ok(s)
    }

    fn step_in_place(
        &self,
        system: &dyn SecondOrderSystem,
        h: f64,
        state: &mut State,
        stats: &mut StepStats,
        comp: Option<&mut Compensation>,
    ) -> Result<()> {
        if h == 0.0 {
            return Ok(());
        }
        let seed = if self.kernel.first_kind() == FlowKind::Kick {
            let mut g = vec![0.0; state.dimension()];
            stats.force_evaluations += 1;
            system.force(state.t, &state.y, &mut g)?;
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::ForceSingularity { t: state.t, detail: "non-finite force".into() });
            }
            FsalCarry::Force { t: state.t, y: state.y.clone(), g }
        } else {
            FsalCarry::None
        };

        let d = state.dimension();
        let mut dy = vec![0.0; d];
        let mut dv = vec![0.0; d];
        let mut t_end = state.t + h;
        for (l, &alpha) in (1..=self.tableau.k).zip(&self.weights) {
            let mut chain = state.clone();
            let mut ctx = StepContext { carry: seed.clone(), compensation: None };
            let sub = h / l as f64;
            for i in 0..l {
                step_in_place(&self.kernel, system, sub, &mut chain, stats, &mut ctx, i + 1 < l)?;
            }
            if l == 1 {
                t_end = chain.t;
            }
            let direct = self.form == CombineForm::Direct;
            for i in 0..d {
                let (y0, v0) = if direct { (0.0, 0.0) } else { (state.y[i], state.v[i]) };
                dy[i] += alpha * (chain.y[i] - y0);
                dv[i] += alpha * (chain.v[i] - v0);
            }
        }
        match self.form {
            CombineForm::Increment => {
                let dt = t_end - state.t;
                add_update(state, comp, &dy, &dv, dt);
            }
            CombineForm::Direct => {
                if let Some(c) = comp {
                    c.reset();
                }
                state.y = dy;
                state.v = dv;
                state.t = t_end;
            }
        }
        Ok(())
    }
}

impl Stepper for Extrapolation {
    fn stages(&self) -> usize {
        self.evaluations_per_step()
    }

    fn advance(
        &self,
        system: &dyn SecondOrderSystem,
        h: f64,
        state: &mut State,
        stats: &mut StepStats,
        ctx: &mut StepContext,
        _merge: bool,
    ) -> Result<()> {
        if let FsalCarry::Drift { tau } = std::mem::take(&mut ctx.carry) {
            drift_in_place(system, tau, state, ctx.compensation.as_mut());
        }
        self.step_in_place(system, h, state, stats, ctx.compensation.as_mut())
    }
}

/// One level-`k` step over the given kernel, combined in increment form.
pub fn extrapolated_step(
    k: usize,
    kernel: StrangKernel,
    system: &dyn SecondOrderSystem,
    h: f64,
    state: &State,
    stats: &mut StepStats,
) -> Result<State> {
    Extrapolation::with_kernel(k, kernel)?.step(system, h, state, stats)
}
