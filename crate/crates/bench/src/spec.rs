use std::fmt;
use std::sync::Arc;

use rknsplit::extrapolation::Extrapolation;
use rknsplit::problems::{self, Kepler, ARENSTORF_MU};
use rknsplit::scheme::{schedule_for, SchemeRegistry, StrangKernel};
use rknsplit::splitting::Stepper;
use rknsplit::{ProblemInstance, State};

use crate::{BenchError, Result};

/// A problem family together with its one scalar parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProblemSpec {
    Kepler { e: f64, mu: f64 },
    Pendulum { alpha: f64 },
    HenonHeiles { alpha: f64 },
    ThreeBodyRotating { mu: f64 },
    ThreeBodyFixed { mu: f64 },
}

impl ProblemSpec {
    pub const NAMES: [&'static str; 5] =
        ["kepler", "pendulum", "henon_heiles", "three_body_rotating", "three_body_fixed"];

    /// `e` applies to Kepler, `alpha` to the pendulum and Henon-Heiles, `mu`
    /// to Kepler and both three-body frames.
    pub fn from_name(name: &str, e: f64, alpha: f64, mu: Option<f64>) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "kepler" => ProblemSpec::Kepler { e, mu: mu.unwrap_or(1.0) },
            "pendulum" => ProblemSpec::Pendulum { alpha },
            "henon_heiles" | "henonheiles" => ProblemSpec::HenonHeiles { alpha },
            "three_body_rotating" | "arenstorf" => ProblemSpec::ThreeBodyRotating { mu: mu.unwrap_or(ARENSTORF_MU) },
            "three_body_fixed" => ProblemSpec::ThreeBodyFixed { mu: mu.unwrap_or(ARENSTORF_MU) },
            _ => return Err(BenchError::UnknownProblem(name.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::Kepler { .. } => "kepler",
            ProblemSpec::Pendulum { .. } => "pendulum",
            ProblemSpec::HenonHeiles { .. } => "henon_heiles",
            ProblemSpec::ThreeBodyRotating { .. } => "three_body_rotating",
            ProblemSpec::ThreeBodyFixed { .. } => "three_body_fixed",
        }
    }

    /// The scanned parameter: `e`, `alpha` or `mu`.
    pub fn parameter(&self) -> f64 {
        match *self {
            ProblemSpec::Kepler { e, .. } => e,
            ProblemSpec::Pendulum { alpha } | ProblemSpec::HenonHeiles { alpha } => alpha,
            ProblemSpec::ThreeBodyRotating { mu } | ProblemSpec::ThreeBodyFixed { mu } => mu,
        }
    }

    pub fn with_parameter(&self, p: f64) -> Self {
        match *self {
            ProblemSpec::Kepler { mu, .. } => ProblemSpec::Kepler { e: p, mu },
            ProblemSpec::Pendulum { .. } => ProblemSpec::Pendulum { alpha: p },
            ProblemSpec::HenonHeiles { .. } => ProblemSpec::HenonHeiles { alpha: p },
            ProblemSpec::ThreeBodyRotating { .. } => ProblemSpec::ThreeBodyRotating { mu: p },
            ProblemSpec::ThreeBodyFixed { .. } => ProblemSpec::ThreeBodyFixed { mu: p },
        }
    }

    pub fn instance(&self) -> Result<ProblemInstance> {
        Ok(match *self {
            ProblemSpec::Kepler { e, mu } => problems::kepler(e, mu)?,
            ProblemSpec::Pendulum { alpha } => problems::pendulum(alpha)?,
            ProblemSpec::HenonHeiles { alpha } => problems::henon_heiles(alpha)?,
            ProblemSpec::ThreeBodyRotating { mu } => problems::three_body_rotating(mu)?,
            ProblemSpec::ThreeBodyFixed { mu } => problems::three_body_fixed(mu)?,
        })
    }

    /// Exact solution, where one is known in closed form.
    pub fn exact(&self, t: f64) -> Option<State> {
        match *self {
            ProblemSpec::Kepler { e, mu } => Some(Kepler { mu }.exact(e, t)),
            _ => None,
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.parameter())
    }
}

/// A named stepper: a registered splitting scheme or an extrapolation level.
#[derive(Clone)]
pub struct MethodSpec {
    pub name: String,
    pub stepper: Arc<dyn Stepper>,
}

impl fmt::Debug for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MethodSpec").field("name", &self.name).field("stages", &self.stepper.stages()).finish()
    }
}

impl MethodSpec {
    /// `EXTRAP4`, `EXTRAP6` and `EXTRAP8` select extrapolated Strang of that
    /// order; anything else is looked up in the registry. Compositions use
    /// the ABA Strang kernel.
    pub fn resolve(name: &str, registry: &SchemeRegistry) -> Result<Self> {
        let upper = name.to_ascii_uppercase();
        if let Some(order) = upper.strip_prefix("EXTRAP") {
            let order: usize =
                order.parse().map_err(|_| BenchError::BadArgument(format!("bad extrapolation order in {name}")))?;
            if !order.is_multiple_of(2) {
                return Err(BenchError::BadArgument(format!("extrapolation order must be even, got {order}")));
            }
            let method = Extrapolation::new(order / 2)?;
            return Ok(MethodSpec { name: upper, stepper: Arc::new(method) });
        }
        let scheme = registry.get(name)?;
        let schedule = schedule_for(scheme, StrangKernel::Aba)?;
        Ok(MethodSpec { name: scheme.name.clone(), stepper: Arc::new(schedule) })
    }

    pub fn resolve_all(names: &[String], registry: &SchemeRegistry) -> Result<Vec<Self>> {
        names.iter().map(|n| MethodSpec::resolve(n, registry)).collect()
    }

    pub fn stages(&self) -> usize {
        self.stepper.stages()
    }
}
