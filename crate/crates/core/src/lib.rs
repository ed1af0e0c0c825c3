//! Runge-Kutta-Nystrom splitting integrators for `y'' = alpha y' + beta y + g(t, y)`.
//!
//! The crate ships six eighth-order palindromic schemes (`A17`, `A18`, `A19`,
//! `B17`, `B18`, `B19`) with their coefficients stored as exact decimals,
//! Strang compositions, harmonic-sequence extrapolation of the Strang
//! method, and a few test problems including a split-step Fourier
//! Schrodinger solver that reuses the same schedules.

pub mod decimal;
pub mod error;
pub mod extrapolation;
pub mod fourier;
pub mod linear;
pub mod problems;
pub mod schedule;
pub mod scheme;
pub mod schrodinger;
pub mod splitting;
pub mod system;

pub use decimal::Decimal;
pub use error::{Error, Result};
pub use extrapolation::{extrapolated_step, tableau, Extrapolation, ExtrapolationTableau};
pub use linear::LinearDrift;
pub use problems::ProblemInstance;
pub use schedule::{Flow, FlowKind, FlowSchedule};
pub use scheme::{
    build_scheme, coefficient_norms, load_external, parse_coefficients, SchemeCoefficients, SchemeKind, SchemeRegistry,
    StrangKernel, RKN8_SCHEMES,
};
pub use splitting::{
    integrate, step, step_exact, Compensation, FsalCarry, IntegrationResult, Observer, StepContext, Stepper,
};
pub use system::{FnSystem, SecondOrderSystem, State, StepStats};
