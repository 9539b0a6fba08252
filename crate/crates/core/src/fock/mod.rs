//! Truncated Fock-space states of optical modes and qubits.
//!
//! A [`QuantumState`] is an ordered list of labelled subsystems with a joint
//! pure vector or density matrix over their Kronecker product. The first
//! subsystem is the most significant digit of the joint index. Every state
//! records the truncation budget `ε` it was built under; operations that move
//! weight past a cutoff fail rather than silently lose more than `ε`.

mod measure;
mod ops;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

pub use measure::{fidelity_to_pure, measure, partial_trace, probability, Conditioned, Element, Measurement};
pub use ops::{apply_gate, apply_loss, beamsplitter_5050, expand_cutoff, Gate};

pub const DEFAULT_CUTOFF: usize = 12;
pub const DEFAULT_TRUNCATION_BUDGET: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("truncation at cutoff {cutoff} drops weight {tail:e}, over the budget {budget:e}")]
    UnderTruncation { cutoff: usize, tail: f64, budget: f64 },
    #[error("no subsystem labelled `{0}`")]
    UnknownLabel(String),
    #[error("label `{0}` appears more than once")]
    DuplicateLabel(String),
    #[error("`{0}` is not an optical mode")]
    NotAMode(String),
    #[error("`{0}` is not a qubit")]
    NotAQubit(String),
    #[error("transmissivity {0} outside [0, 1]")]
    InvalidTransmissivity(f64),
    #[error("conditioning on an outcome of probability {0:e}")]
    ImpossibleConditioning(f64),
    #[error("{0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsystemKind {
    Mode { cutoff: usize },
    Qubit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsystem {
    pub label: String,
    pub kind: SubsystemKind,
}

impl Subsystem {
    pub fn mode(label: &str, cutoff: usize) -> Self {
        Self { label: label.to_owned(), kind: SubsystemKind::Mode { cutoff } }
    }

    pub fn qubit(label: &str) -> Self {
        Self { label: label.to_owned(), kind: SubsystemKind::Qubit }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            SubsystemKind::Mode { cutoff } => cutoff + 1,
            SubsystemKind::Qubit => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Repr {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    subsystems: Vec<Subsystem>,
    repr: Repr,
    budget: f64,
}

impl QuantumState {
    pub fn pure(subsystems: Vec<Subsystem>, amplitudes: DVector<C64>, budget: f64) -> Result<Self, FockError> {
        let dim = check_subsystems(&subsystems)?;
        if amplitudes.len() != dim {
            return Err(FockError::Shape(format!("{} amplitudes for dimension {dim}", amplitudes.len())));
        }
        Ok(Self { subsystems, repr: Repr::Pure(amplitudes), budget })
    }

    pub fn mixed(subsystems: Vec<Subsystem>, rho: DMatrix<C64>, budget: f64) -> Result<Self, FockError> {
        let dim = check_subsystems(&subsystems)?;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(FockError::Shape(format!("{}x{} matrix for dimension {dim}", rho.nrows(), rho.ncols())));
        }
        Ok(Self { subsystems, repr: Repr::Mixed(rho), budget })
    }

    pub(crate) fn from_repr(subsystems: Vec<Subsystem>, repr: Repr, budget: f64) -> Self {
        Self { subsystems, repr, budget }
    }

    /// Single qubit `c0|0⟩ + c1|1⟩`.
    pub fn qubit(label: &str, c0: C64, c1: C64) -> Self {
        Self {
            subsystems: vec![Subsystem::qubit(label)],
            repr: Repr::Pure(DVector::from_vec(vec![c0, c1])),
            budget: 0.0,
        }
    }

    /// Fock state `|n⟩` of a mode truncated at `cutoff`.
    pub fn number(label: &str, n: usize, cutoff: usize) -> Result<Self, FockError> {
        if n > cutoff {
            return Err(FockError::Shape(format!("|{n}⟩ does not fit under cutoff {cutoff}")));
        }
        let mut v = DVector::zeros(cutoff + 1);
        v[n] = C64::new(1.0, 0.0);
        Ok(Self { subsystems: vec![Subsystem::mode(label, cutoff)], repr: Repr::Pure(v), budget: 0.0 })
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn labels(&self) -> Vec<&str> {
        self.subsystems.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn dim(&self) -> usize {
        self.subsystems.iter().map(Subsystem::dim).product()
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, Repr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Mixed(_) => None,
        }
    }

    pub(crate) fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn density(&self) -> DMatrix<C64> {
        match &self.repr {
            Repr::Pure(v) => v * v.adjoint(),
            Repr::Mixed(m) => m.clone(),
        }
    }

    pub fn into_mixed(self) -> Self {
        let rho = self.density();
        Self { repr: Repr::Mixed(rho), ..self }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.norm_squared(),
            Repr::Mixed(m) => m.trace().re,
        }
    }

    /// Weight missing from a unit trace.
    pub fn norm_deficit(&self) -> f64 {
        1.0 - self.trace()
    }

    pub fn normalized(&self) -> Result<Self, FockError> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(FockError::ImpossibleConditioning(t));
        }
        let repr = match &self.repr {
            Repr::Pure(v) => Repr::Pure(v.unscale(t.sqrt())),
            Repr::Mixed(m) => Repr::Mixed(m.unscale(t)),
        };
        Ok(Self { repr, ..self.clone() })
    }

    /// Largest `|ρ_ij - conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        match &self.repr {
            Repr::Pure(_) => 0.0,
            Repr::Mixed(m) => {
                let n = m.nrows();
                let mut worst: f64 = 0.0;
                for i in 0..n {
                    for j in i..n {
                        worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                    }
                }
                worst
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let rho = self.density();
        let herm = (&rho + rho.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn relabel(mut self, from: &str, to: &str) -> Result<Self, FockError> {
        let i = self.position(from)?;
        if from != to && self.position(to).is_ok() {
            return Err(FockError::DuplicateLabel(to.to_owned()));
        }
        self.subsystems[i].label = to.to_owned();
        Ok(self)
    }

    pub(crate) fn position(&self, label: &str) -> Result<usize, FockError> {
        self.subsystems.iter().position(|s| s.label == label).ok_or_else(|| FockError::UnknownLabel(label.to_owned()))
    }

    pub(crate) fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(Subsystem::dim).collect()
    }
}

fn check_subsystems(subsystems: &[Subsystem]) -> Result<usize, FockError> {
    for (i, s) in subsystems.iter().enumerate() {
        if subsystems[..i].iter().any(|t| t.label == s.label) {
            return Err(FockError::DuplicateLabel(s.label.clone()));
        }
    }
    Ok(subsystems.iter().map(Subsystem::dim).product())
}

/// `e^{-μ} Σ_{n > cutoff} μ^n / n!`, summed directly to avoid cancellation.
pub fn poisson_tail(mean: f64, cutoff: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut term = (-mean).exp();
    for n in 1..=cutoff + 1 {
        term *= mean / n as f64;
    }
    let mut tail = 0.0;
    let mut n = cutoff + 1;
    while term > tail * 1e-18 && n < cutoff + 400 {
        tail += term;
        n += 1;
        term *= mean / n as f64;
    }
    tail
}

/// Coherent state `|β⟩` truncated at `cutoff`, rejected when the dropped
/// Poisson tail is not below `budget`.
pub fn coherent_state(label: &str, beta: C64, cutoff: usize, budget: f64) -> Result<QuantumState, FockError> {
    let mean = beta.norm_sqr();
    let tail = poisson_tail(mean, cutoff);
    if tail >= budget && mean > 0.0 {
        return Err(FockError::UnderTruncation { cutoff, tail, budget });
    }
    let mut v = DVector::zeros(cutoff + 1);
    let mut c = C64::new((-mean / 2.0).exp(), 0.0);
    for n in 0..=cutoff {
        if n > 0 {
            c *= beta / (n as f64).sqrt();
        }
        v[n] = c;
    }
    Ok(QuantumState::from_repr(vec![Subsystem::mode(label, cutoff)], Repr::Pure(v), budget))
}

/// Kronecker product, first argument most significant. Budgets add.
pub fn tensor(states: &[&QuantumState]) -> Result<QuantumState, FockError> {
    let (first, rest) = states.split_first().ok_or_else(|| FockError::Shape("tensor of no states".into()))?;
    let mut acc = (*first).clone();
    for s in rest {
        let mut subsystems = acc.subsystems.clone();
        subsystems.extend(s.subsystems.iter().cloned());
        check_subsystems(&subsystems)?;
        let repr = match (&acc.repr, &s.repr) {
            (Repr::Pure(a), Repr::Pure(b)) => Repr::Pure(a.kronecker(b)),
            _ => Repr::Mixed(acc.density().kronecker(&s.density())),
        };
        acc = QuantumState::from_repr(subsystems, repr, acc.budget + s.budget);
    }
    Ok(acc)
}

/// Joint index bookkeeping for operators acting on a subset of subsystems.
///
/// `full[r * target_dim + t]` is the joint index whose target digits compose
/// to `t` (in the order the targets were given) and whose remaining digits
/// compose to `r` (in state order).
pub(crate) struct Split {
    pub target_dim: usize,
    pub rest_dim: usize,
    pub full: Vec<usize>,
}

impl Split {
    pub fn new(dims: &[usize], targets: &[usize]) -> Self {
        let total: usize = dims.iter().product();
        let target_dim: usize = targets.iter().map(|&i| dims[i]).product();
        let rest: Vec<usize> = (0..dims.len()).filter(|i| !targets.contains(i)).collect();
        let rest_dim = total / target_dim;
        let mut full = vec![0; total];
        let mut digits = vec![0usize; dims.len()];
        for idx in 0..total {
            let mut k = idx;
            for i in (0..dims.len()).rev() {
                digits[i] = k % dims[i];
                k /= dims[i];
            }
            let t = targets.iter().fold(0, |acc, &i| acc * dims[i] + digits[i]);
            let r = rest.iter().fold(0, |acc, &i| acc * dims[i] + digits[i]);
            full[r * target_dim + t] = idx;
        }
        Self { target_dim, rest_dim, full }
    }

    #[inline]
    pub fn at(&self, r: usize, t: usize) -> usize {
        self.full[r * self.target_dim + t]
    }
}
