//! Diagonal POVMs, conditioning, partial trace and overlaps.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::{FockError, QuantumState, Repr, Split, SubsystemKind};

/// Smallest outcome probability that may be conditioned on.
const MIN_PROBABILITY: f64 = 1e-15;

/// POVM element on a single subsystem. All elements are diagonal in the
/// Fock (or computational) basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    /// Threshold detector silent: `|0⟩⟨0|`.
    NoClick,
    /// Threshold detector fired: `I - |0⟩⟨0|`.
    Click,
    /// Number-resolving detector registered exactly `n` photons.
    Pnr(usize),
    /// Qubit projected on `|0⟩` or `|1⟩`.
    Qubit(u8),
}

impl Element {
    fn weights(self, label: &str, kind: SubsystemKind) -> Result<Vec<f64>, FockError> {
        match (self, kind) {
            (Element::NoClick, SubsystemKind::Mode { cutoff }) => {
                Ok((0..=cutoff).map(|n| if n == 0 { 1.0 } else { 0.0 }).collect())
            }
            (Element::Click, SubsystemKind::Mode { cutoff }) => {
                Ok((0..=cutoff).map(|n| if n == 0 { 0.0 } else { 1.0 }).collect())
            }
            (Element::Pnr(k), SubsystemKind::Mode { cutoff }) => {
                Ok((0..=cutoff).map(|n| if n == k { 1.0 } else { 0.0 }).collect())
            }
            (Element::Qubit(b), SubsystemKind::Qubit) if b < 2 => {
                Ok((0..2).map(|n| if n == b as usize { 1.0 } else { 0.0 }).collect())
            }
            (Element::Qubit(b), SubsystemKind::Qubit) => {
                Err(FockError::Shape(format!("qubit outcome {b} on `{label}`")))
            }
            (Element::Qubit(_), SubsystemKind::Mode { .. }) => Err(FockError::NotAQubit(label.to_owned())),
            (_, SubsystemKind::Qubit) => Err(FockError::NotAMode(label.to_owned())),
        }
    }
}

/// Product of single-subsystem elements.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Measurement {
    factors: Vec<(String, Element)>,
}

impl Measurement {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn on(mut self, label: &str, element: Element) -> Self {
        self.factors.push((label.to_owned(), element));
        self
    }

    pub fn factors(&self) -> &[(String, Element)] {
        &self.factors
    }

    /// Joint diagonal weights over the state's index space.
    fn weights(&self, state: &QuantumState) -> Result<Vec<f64>, FockError> {
        let dims = state.dims();
        let mut w = vec![1.0; state.dim()];
        let mut seen: Vec<&str> = Vec::new();
        for (label, element) in &self.factors {
            if seen.contains(&label.as_str()) {
                return Err(FockError::DuplicateLabel(label.clone()));
            }
            seen.push(label);
            let i = state.position(label)?;
            let local = element.weights(label, state.subsystems()[i].kind)?;
            let stride: usize = dims[i + 1..].iter().product();
            for (idx, wi) in w.iter_mut().enumerate() {
                *wi *= local[(idx / stride) % dims[i]];
            }
        }
        Ok(w)
    }
}

/// Probability of an outcome without conditioning, `tr(E ρ)`.
pub fn probability(state: &QuantumState, m: &Measurement) -> Result<f64, FockError> {
    let w = m.weights(state)?;
    Ok(match state.repr() {
        Repr::Pure(v) => v.iter().zip(&w).map(|(a, wi)| wi * a.norm_sqr()).sum(),
        Repr::Mixed(rho) => (0..rho.nrows()).map(|i| w[i] * rho[(i, i)].re).sum(),
    })
}

/// Post-measurement state with its unconditional probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioned {
    pub probability: f64,
    pub state: QuantumState,
}

/// Conditions on the outcome `m`: `E^{1/2} ρ E^{1/2} / p`. Measured optical
/// modes are traced out; measured qubits stay, projected.
pub fn measure(state: &QuantumState, m: &Measurement) -> Result<Conditioned, FockError> {
    let w = m.weights(state)?;
    let root: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let (p, repr) = match state.repr() {
        Repr::Pure(v) => {
            let out = DVector::from_iterator(v.len(), v.iter().zip(&root).map(|(a, r)| a * *r));
            (out.norm_squared(), Repr::Pure(out))
        }
        Repr::Mixed(rho) => {
            let n = rho.nrows();
            let out = DMatrix::from_fn(n, n, |i, j| rho[(i, j)] * (root[i] * root[j]));
            ((0..n).map(|i| out[(i, i)].re).sum::<f64>(), Repr::Mixed(out))
        }
    };
    if !(p >= MIN_PROBABILITY) {
        return Err(FockError::ImpossibleConditioning(p));
    }
    let projected = QuantumState::from_repr(state.subsystems().to_vec(), repr, state.budget()).normalized()?;
    let keep: Vec<&str> = state
        .subsystems()
        .iter()
        .filter(|s| matches!(s.kind, SubsystemKind::Qubit) || !m.factors.iter().any(|(l, _)| *l == s.label))
        .map(|s| s.label.as_str())
        .collect();
    let reduced = if keep.len() == state.subsystems().len() { projected } else { partial_trace(&projected, &keep)? };
    Ok(Conditioned { probability: p, state: reduced })
}

/// Reduced state on `keep`, which stay in their original order.
pub fn partial_trace(state: &QuantumState, keep: &[&str]) -> Result<QuantumState, FockError> {
    let mut keep_idx = Vec::with_capacity(keep.len());
    for label in keep {
        let i = state.position(label)?;
        if keep_idx.contains(&i) {
            return Err(FockError::DuplicateLabel((*label).to_owned()));
        }
        keep_idx.push(i);
    }
    keep_idx.sort_unstable();
    let traced: Vec<usize> = (0..state.subsystems().len()).filter(|i| !keep_idx.contains(i)).collect();
    let split = Split::new(&state.dims(), &traced);
    let n = split.rest_dim;
    let mut out = DMatrix::<C64>::zeros(n, n);
    match state.repr() {
        Repr::Pure(v) => {
            for r in 0..n {
                for s in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for t in 0..split.target_dim {
                        acc += v[split.at(r, t)] * v[split.at(s, t)].conj();
                    }
                    out[(r, s)] = acc;
                }
            }
        }
        Repr::Mixed(rho) => {
            for r in 0..n {
                for s in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for t in 0..split.target_dim {
                        acc += rho[(split.at(r, t), split.at(s, t))];
                    }
                    out[(r, s)] = acc;
                }
            }
        }
    }
    let subsystems = keep_idx.iter().map(|&i| state.subsystems()[i].clone()).collect();
    Ok(QuantumState::from_repr(subsystems, Repr::Mixed(out), state.budget()))
}

/// `⟨ψ|ρ|ψ⟩ / tr ρ` for a target `ψ` over the full joint space (normalized here).
pub fn fidelity_to_pure(state: &QuantumState, target: &[C64]) -> Result<f64, FockError> {
    if target.len() != state.dim() {
        return Err(FockError::Shape(format!(
            "target of length {} for a state of dimension {}",
            target.len(),
            state.dim()
        )));
    }
    let psi = DVector::from_column_slice(target);
    let norm = psi.norm_squared();
    if norm == 0.0 {
        return Err(FockError::Shape("zero target vector".into()));
    }
    let overlap = match state.repr() {
        Repr::Pure(v) => psi.dotc(v).norm_sqr(),
        Repr::Mixed(rho) => psi.dotc(&(rho * &psi)).re,
    };
    Ok(overlap / norm / state.trace())
}
