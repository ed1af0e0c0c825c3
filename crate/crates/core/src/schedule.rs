use crate::error::{Error, Result};
use crate::scheme::CONSISTENCY_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowKind {
    /// Exact flow of `y' = v` (plus the linear part and the clock, if any).
    Drift,
    /// Exact flow of `v' = g(t, y)`; one force evaluation.
    Kick,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flow {
    pub kind: FlowKind,
    /// Fraction of the step size.
    pub coeff: f64,
}

/// Alternating drift/kick sequence, applied first entry first.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSchedule {
    entries: Vec<Flow>,
    fsal_mergeable: bool,
    stages: usize,
}

impl FlowSchedule {
    /// Merges adjacent flows of the same kind and checks that the drift and
    /// kick coefficients each sum to one.
    pub fn new(raw: Vec<Flow>) -> Result<Self> {
        let mut entries: Vec<Flow> = Vec::with_capacity(raw.len());
        for f in raw {
            match entries.last_mut() {
                Some(last) if last.kind == f.kind => last.coeff += f.coeff,
                _ => entries.push(f),
            }
        }
        if entries.is_empty() {
            return Err(inconsistent("empty schedule".into()));
        }
        for kind in [FlowKind::Drift, FlowKind::Kick] {
            let sum: f64 = entries.iter().filter(|f| f.kind == kind).map(|f| f.coeff).sum();
            if (sum - 1.0).abs() > CONSISTENCY_TOL {
                return Err(inconsistent(format!("{kind:?} coefficients sum to {sum:.17}")));
            }
        }
        let first = entries[0].kind;
        let last = entries[entries.len() - 1].kind;
        let fsal_mergeable = entries.len() > 1 && first == last;
        let kicks = entries.iter().filter(|f| f.kind == FlowKind::Kick).count();
        // a trailing kick is shared with the leading kick of the next step
        let stages = if fsal_mergeable && first == FlowKind::Kick { kicks - 1 } else { kicks };
        Ok(FlowSchedule { entries, fsal_mergeable, stages })
    }

    pub fn entries(&self) -> &[Flow] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn fsal_mergeable(&self) -> bool {
        self.fsal_mergeable
    }

    /// Force evaluations per step in an unbroken FSAL run.
    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn kicks(&self) -> usize {
        self.entries.iter().filter(|f| f.kind == FlowKind::Kick).count()
    }

    pub fn drifts(&self) -> usize {
        self.entries.iter().filter(|f| f.kind == FlowKind::Drift).count()
    }

    pub fn first_kind(&self) -> FlowKind {
        self.entries[0].kind
    }

    pub fn last_kind(&self) -> FlowKind {
        self.entries[self.entries.len() - 1].kind
    }

    pub fn is_palindromic(&self) -> bool {
        self.entries.iter().eq(self.entries.iter().rev())
    }

    pub fn reversed(&self) -> FlowSchedule {
        let mut entries = self.entries.clone();
        entries.reverse();
        FlowSchedule { entries, ..self.clone() }
    }
}

fn inconsistent(reason: String) -> Error {
    Error::InconsistentScheme { name: "<schedule>".into(), reason }
}
