use crate::error::Result;
use crate::linear::LinearDrift;

/// Phase-space point `(y, v)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(y: Vec<f64>, v: Vec<f64>, t: f64) -> Self {
        assert_eq!(y.len(), v.len(), "position and velocity dimensions differ");
        State { y, v, t }
    }

    pub fn dimension(&self) -> usize {
        self.y.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.y.iter().chain(&self.v).all(|x| x.is_finite())
    }

    /// `(y, v)` flattened.
    pub fn phase(&self) -> Vec<f64> {
        self.y.iter().chain(&self.v).copied().collect()
    }

    pub fn from_phase(phase: &[f64], t: f64) -> Self {
        let d = phase.len() / 2;
        State::new(phase[..d].to_vec(), phase[d..].to_vec(), t)
    }

    /// Max-norm of the `(y, v)` difference.
    pub fn phase_distance(&self, other: &State) -> f64 {
        self.y.iter().zip(&other.y).chain(self.v.iter().zip(&other.v)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn phase_norm(&self) -> f64 {
        self.y.iter().chain(&self.v).map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// `y'' = alpha y' + beta y + g(t, y)`, with the linear part optional.
pub trait SecondOrderSystem: Send + Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    /// Writes `g(t, y)` into `out`.
    fn force(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;

    fn linear_part(&self) -> Option<&LinearDrift> {
        None
    }

    /// Conserved quantity, when the problem has one.
    fn energy(&self, _state: &State) -> Option<f64> {
        None
    }

    /// Potential with `g = -grad V`, when `g` is a gradient field.
    fn potential(&self, _t: f64, _y: &[f64]) -> Option<f64> {
        None
    }

    fn is_autonomous(&self) -> bool {
        true
    }
}

/// Cost counters for one integration. Never shared between runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub force_evaluations: u64,
    pub steps_taken: u64,
    pub fsal_merges: u64,
}

type ForceFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type EnergyFn = dyn Fn(&State) -> f64 + Send + Sync;

/// Closure-backed system, handy for tests and one-off problems.
pub struct FnSystem {
    name: String,
    dimension: usize,
    force: Box<ForceFn>,
    energy: Option<Box<EnergyFn>>,
    linear: Option<LinearDrift>,
    autonomous: bool,
}

impl FnSystem {
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        force: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        FnSystem { name: name.into(), dimension, force: Box::new(force), energy: None, linear: None, autonomous: true }
    }

    pub fn with_energy(mut self, energy: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        self.energy = Some(Box::new(energy));
        self
    }

    pub fn with_linear_part(mut self, linear: LinearDrift) -> Self {
        self.linear = Some(linear);
        self
    }

    pub fn time_dependent(mut self) -> Self {
        self.autonomous = false;
        self
    }

    /// `y'' = 0`.
    pub fn free(dimension: usize) -> Self {
        FnSystem::new("free", dimension, |_, _, out| out.fill(0.0))
            .with_energy(|s| 0.5 * s.v.iter().map(|v| v * v).sum::<f64>())
    }

    /// `y'' = -omega^2 y` componentwise.
    pub fn harmonic(dimension: usize, omega: f64) -> Self {
        let w2 = omega * omega;
        FnSystem::new("harmonic", dimension, move |_, y, out| {
            for (o, yi) in out.iter_mut().zip(y) {
                *o = -w2 * yi;
            }
        })
        .with_energy(move |s| {
            0.5 * s.v.iter().map(|v| v * v).sum::<f64>() + 0.5 * w2 * s.y.iter().map(|y| y * y).sum::<f64>()
        })
    }
}

impl SecondOrderSystem for FnSystem {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn force(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.force)(t, y, out);
        Ok(())
    }

    fn linear_part(&self) -> Option<&LinearDrift> {
        self.linear.as_ref()
    }

    fn energy(&self, state: &State) -> Option<f64> {
        self.energy.as_ref().map(|e| e(state))
    }

    fn is_autonomous(&self) -> bool {
        self.autonomous
    }
}
