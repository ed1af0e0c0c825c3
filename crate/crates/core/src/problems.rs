//! Classical test systems with their canonical initial data.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linear::LinearDrift;
use crate::system::{SecondOrderSystem, State};

/// Mass ratio of the Earth-Moon Arenstorf configuration.
pub const ARENSTORF_MU: f64 = 0.012277471;
/// Period of the Arenstorf orbit.
pub const ARENSTORF_PERIOD: f64 = 17.065_216_560_157_964;
pub const ARENSTORF_Y1: f64 = 0.994;
/// `y2'(0)` in the frame where the primaries revolve.
pub const ARENSTORF_V2: f64 = -1.007_585_106_379_082_6;
/// `y2'(0)` in the frame where the primaries are at rest.
pub const ARENSTORF_V2_FIXED: f64 = -2.001_585_106_379_082_4;

/// Force evaluations closer than this to a primary are refused.
pub const COLLISION_GUARD: f64 = 1e-30;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InvariantRefs {
    pub energy: Option<f64>,
    pub period: Option<f64>,
}

#[derive(Clone)]
pub struct ProblemInstance {
    pub system: Arc<dyn SecondOrderSystem>,
    pub initial: State,
    pub invariant_refs: InvariantRefs,
    pub parameters: BTreeMap<String, f64>,
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("system", &self.system.name())
            .field("initial", &self.initial)
            .field("invariant_refs", &self.invariant_refs)
            .field("parameters", &self.parameters)
            .finish()
    }
}

impl ProblemInstance {
    pub fn name(&self) -> &str {
        self.system.name()
    }

    pub fn parameter(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).copied()
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Two-body problem `q'' = -mu q / |q|^3`.
#[derive(Clone, Debug)]
pub struct Kepler {
    pub mu: f64,
}

impl SecondOrderSystem for Kepler {
    fn name(&self) -> &str {
        "kepler"
    }

    fn dimension(&self) -> usize {
        2
    }

    fn force(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let r2 = y[0] * y[0] + y[1] * y[1];
        let r3 = r2 * r2.sqrt();
        out[0] = -self.mu * y[0] / r3;
        out[1] = -self.mu * y[1] / r3;
        Ok(())
    }

    fn energy(&self, s: &State) -> Option<f64> {
        let v2 = s.v[0] * s.v[0] + s.v[1] * s.v[1];
        Some(0.5 * v2 + self.potential(s.t, &s.y)?)
    }

    fn potential(&self, _t: f64, y: &[f64]) -> Option<f64> {
        Some(-self.mu / y[0].hypot(y[1]))
    }
}

impl Kepler {
    pub fn angular_momentum(s: &State) -> f64 {
        s.y[0] * s.v[1] - s.y[1] * s.v[0]
    }

    /// Exact orbit through the canonical initial data: perihelion at
    /// `(1 - e, 0)` at `t = 0`, semi-major axis one.
    pub fn exact(&self, e: f64, t: f64) -> State {
        let n = self.mu.sqrt();
        let m = (n * t).rem_euclid(2.0 * PI);
        let mut big_e = if e < 0.8 { m } else { PI };
        for _ in 0..60 {
            let f = big_e - e * big_e.sin() - m;
            let step = f / (1.0 - e * big_e.cos());
            big_e -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (s, c) = big_e.sin_cos();
        let b = (1.0 - e * e).sqrt();
        let denom = 1.0 - e * c;
        State::new(vec![c - e, b * s], vec![-n * s / denom, n * b * c / denom], t)
    }
}

/// `q'' = -sin q`.
#[derive(Clone, Debug)]
pub struct Pendulum;

impl SecondOrderSystem for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn dimension(&self) -> usize {
        1
    }

    fn force(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = -y[0].sin();
        Ok(())
    }

    fn energy(&self, s: &State) -> Option<f64> {
        Some(0.5 * s.v[0] * s.v[0] - s.y[0].cos())
    }

    fn potential(&self, _t: f64, y: &[f64]) -> Option<f64> {
        Some(-y[0].cos())
    }
}

#[derive(Clone, Debug)]
pub struct HenonHeiles;

impl SecondOrderSystem for HenonHeiles {
    fn name(&self) -> &str {
        "henon_heiles"
    }

    fn dimension(&self) -> usize {
        2
    }

    fn force(&self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let (q1, q2) = (y[0], y[1]);
        out[0] = -q1 - 2.0 * q1 * q2;
        out[1] = -q2 - q1 * q1 + q2 * q2;
        Ok(())
    }

    fn energy(&self, s: &State) -> Option<f64> {
        Some(0.5 * (s.v[0] * s.v[0] + s.v[1] * s.v[1]) + self.potential(s.t, &s.y)?)
    }

    fn potential(&self, _t: f64, y: &[f64]) -> Option<f64> {
        let (q1, q2) = (y[0], y[1]);
        Some(0.5 * (q1 * q1 + q2 * q2) + q1 * q1 * q2 - q2 * q2 * q2 / 3.0)
    }
}

/// Pull of the two primaries at `a` (mass `1 - mu`) and `b` (mass `mu`).
fn primaries_force(t: f64, mu: f64, a: [f64; 2], b: [f64; 2], y: &[f64], out: &mut [f64]) -> Result<()> {
    let mu1 = 1.0 - mu;
    let (a1, a2) = (y[0] - a[0], y[1] - a[1]);
    let (b1, b2) = (y[0] - b[0], y[1] - b[1]);
    let d1 = (a1 * a1 + a2 * a2).powf(1.5);
    let d2 = (b1 * b1 + b2 * b2).powf(1.5);
    if d1 < COLLISION_GUARD {
        return Err(Error::CollisionSingularity { t, body: 1 });
    }
    if d2 < COLLISION_GUARD {
        return Err(Error::CollisionSingularity { t, body: 2 });
    }
    out[0] = -mu1 * a1 / d1 - mu * b1 / d2;
    out[1] = -mu1 * a2 / d1 - mu * b2 / d2;
    Ok(())
}

fn primaries_potential(mu: f64, a: [f64; 2], b: [f64; 2], y: &[f64]) -> f64 {
    let r1 = (y[0] - a[0]).hypot(y[1] - a[1]);
    let r2 = (y[0] - b[0]).hypot(y[1] - b[1]);
    -(1.0 - mu) / r1 - mu / r2
}

/// Restricted three-body problem with the primaries revolving on circles of
/// radius `mu` and `1 - mu` about the origin.
#[derive(Clone, Debug)]
pub struct ThreeBodyRotating {
    pub mu: f64,
}

impl ThreeBodyRotating {
    pub fn primaries(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let (s, c) = t.sin_cos();
        let mu1 = 1.0 - self.mu;
        ([-self.mu * c, -self.mu * s], [mu1 * c, mu1 * s])
    }
}

impl SecondOrderSystem for ThreeBodyRotating {
    fn name(&self) -> &str {
        "three_body_rotating"
    }

    fn dimension(&self) -> usize {
        2
    }

    fn force(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let (a, b) = self.primaries(t);
        primaries_force(t, self.mu, a, b, y, out)
    }

    /// Jacobi constant `|v|^2/2 - (y1 v2 - y2 v1) + V(t, y)`.
    fn energy(&self, s: &State) -> Option<f64> {
        let kin = 0.5 * (s.v[0] * s.v[0] + s.v[1] * s.v[1]);
        let l = s.y[0] * s.v[1] - s.y[1] * s.v[0];
        Some(kin - l + self.potential(s.t, &s.y)?)
    }

    fn potential(&self, t: f64, y: &[f64]) -> Option<f64> {
        let (a, b) = self.primaries(t);
        Some(primaries_potential(self.mu, a, b, y))
    }

    fn is_autonomous(&self) -> bool {
        false
    }
}

/// Same problem in coordinates co-rotating with the primaries, which sit at
/// rest at `(-mu, 0)` and `(1 - mu, 0)`. Coriolis and centrifugal terms form
/// the linear part.
#[derive(Clone, Debug)]
pub struct ThreeBodyFixed {
    pub mu: f64,
    linear: LinearDrift,
}

impl ThreeBodyFixed {
    pub fn new(mu: f64) -> Self {
        let alpha = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let linear = LinearDrift::new(alpha, DMatrix::identity(2, 2)).expect("2x2 linear part");
        ThreeBodyFixed { mu, linear }
    }

    fn primaries(&self) -> ([f64; 2], [f64; 2]) {
        ([-self.mu, 0.0], [1.0 - self.mu, 0.0])
    }
}

impl SecondOrderSystem for ThreeBodyFixed {
    fn name(&self) -> &str {
        "three_body_fixed"
    }

    fn dimension(&self) -> usize {
        2
    }

    fn force(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let (a, b) = self.primaries();
        primaries_force(t, self.mu, a, b, y, out)
    }

    fn linear_part(&self) -> Option<&LinearDrift> {
        Some(&self.linear)
    }

    /// Jacobi constant `|v|^2/2 - |y|^2/2 + V(y)`.
    fn energy(&self, s: &State) -> Option<f64> {
        let kin = 0.5 * (s.v[0] * s.v[0] + s.v[1] * s.v[1]);
        let cen = 0.5 * (s.y[0] * s.y[0] + s.y[1] * s.y[1]);
        Some(kin - cen + self.potential(s.t, &s.y)?)
    }

    fn potential(&self, _t: f64, y: &[f64]) -> Option<f64> {
        let (a, b) = self.primaries();
        Some(primaries_potential(self.mu, a, b, y))
    }
}

pub fn kepler(e: f64, mu: f64) -> Result<ProblemInstance> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::EccentricityOutOfRange(e));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("gravitational parameter must be positive, got {mu}")));
    }
    let p2 = (mu * (1.0 + e) / (1.0 - e)).sqrt();
    Ok(ProblemInstance {
        system: Arc::new(Kepler { mu }),
        initial: State::new(vec![1.0 - e, 0.0], vec![0.0, p2], 0.0),
        invariant_refs: InvariantRefs { energy: Some(-0.5 * mu), period: Some(2.0 * PI / mu.sqrt()) },
        parameters: params(&[("e", e), ("mu", mu)]),
    })
}

pub fn pendulum(alpha: f64) -> Result<ProblemInstance> {
    Ok(ProblemInstance {
        system: Arc::new(Pendulum),
        initial: State::new(vec![0.0], vec![alpha], 0.0),
        invariant_refs: InvariantRefs { energy: Some(0.5 * alpha * alpha - 1.0), period: None },
        parameters: params(&[("alpha", alpha)]),
    })
}

pub fn henon_heiles(alpha: f64) -> Result<ProblemInstance> {
    Ok(ProblemInstance {
        system: Arc::new(HenonHeiles),
        initial: State::new(vec![alpha / 2.0, 0.0], vec![0.0, alpha / 4.0], 0.0),
        invariant_refs: InvariantRefs { energy: Some(5.0 * alpha * alpha / 32.0), period: None },
        parameters: params(&[("alpha", alpha)]),
    })
}

fn check_mass_ratio(mu: f64) -> Result<()> {
    if mu > 0.0 && mu < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mass ratio must lie in (0, 1), got {mu}")))
    }
}

pub fn three_body_rotating(mu: f64) -> Result<ProblemInstance> {
    check_mass_ratio(mu)?;
    let system = ThreeBodyRotating { mu };
    let initial = State::new(vec![ARENSTORF_Y1, 0.0], vec![0.0, ARENSTORF_V2], 0.0);
    let energy = system.energy(&initial);
    Ok(ProblemInstance {
        system: Arc::new(system),
        initial,
        invariant_refs: InvariantRefs { energy, period: Some(ARENSTORF_PERIOD) },
        parameters: params(&[("mu", mu)]),
    })
}

pub fn three_body_fixed(mu: f64) -> Result<ProblemInstance> {
    check_mass_ratio(mu)?;
    let system = ThreeBodyFixed::new(mu);
    let initial = State::new(vec![ARENSTORF_Y1, 0.0], vec![0.0, ARENSTORF_V2_FIXED], 0.0);
    let energy = system.energy(&initial);
    Ok(ProblemInstance {
        system: Arc::new(system),
        initial,
        invariant_refs: InvariantRefs { energy, period: Some(ARENSTORF_PERIOD) },
        parameters: params(&[("mu", mu)]),
    })
}

fn rotate(angle: f64, x: &[f64]) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    vec![c * x[0] - s * x[1], s * x[0] + c * x[1]]
}

/// Maps a [`ThreeBodyRotating`] state at time `t` to [`ThreeBodyFixed`]
/// coordinates (the two agree in position at `t = 0`).
pub fn revolving_to_corotating(s: &State) -> State {
    let y = rotate(-s.t, &s.y);
    let w = rotate(-s.t, &s.v);
    let v = vec![w[0] + y[1], w[1] - y[0]];
    State::new(y, v, s.t)
}

/// Inverse of [`revolving_to_corotating`].
pub fn corotating_to_revolving(s: &State) -> State {
    let w = vec![s.v[0] - s.y[1], s.v[1] + s.y[0]];
    State::new(rotate(s.t, &s.y), rotate(s.t, &w), s.t)
}

/// Max-norm distance between the Arenstorf initial data and a
/// [`ThreeBodyRotating`] state after one period, with the primaries' rotation
/// by `t` undone first.
pub fn arenstorf_return_error(initial: &State, end: &State) -> f64 {
    let back = State::new(rotate(-end.t, &end.y), rotate(-end.t, &end.v), end.t);
    back.phase_distance(initial)
}
