//! Experiment harness for the `rknsplit` integrators: cost-accuracy sweeps,
//! parameter scans, convergence-order fits and the Arenstorf closure study.
//! All results are [`BenchmarkRecord`] rows with a fixed CSV layout.

pub mod order;
pub mod spec;
pub mod sweep;

pub use order::{convergence_study, estimate_order, fit_in_window, geometric_counts, ConvergencePoint, Reference};
pub use spec::{MethodSpec, ProblemSpec};
pub use sweep::{
    arenstorf_run, commensurate_steps, log_grid, parameter_scan, read_records, run_sweep, write_records,
    BenchmarkRecord, SweepConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] rknsplit::Error),
    #[error("need at least {needed} points for a fit, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
    #[error("bad argument: {0}")]
    BadArgument(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;
