//! Entanglement-based restatement of the preparation schemes for key
//! distribution: register–node states, swapping through a chain of ideal
//! links and the correlations left between the two client registers.
//!
//! Everything here is lossless with number-resolving detection; the
//! register of each client is a qubit whose `|k⟩` selects the pulse sent.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{
    apply_gate, beamsplitter_5050, coherent_state, measure, partial_trace, probability, tensor, Element, FockError,
    Gate, Measurement, QuantumState, Subsystem,
};
use crate::oracle::{emitter, OracleConfig, Port};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QkdError {
    #[error("xi = {0} is outside (0, 1)")]
    InvalidXi(f64),
    #[error("alpha = {0} must be positive and finite")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Below this an outcome is treated as never occurring.
const MIN_PATTERN_PROBABILITY: f64 = 1e-15;
/// Largest density-matrix entry difference accepted as "the same state".
const SAME_STATE_TOLERANCE: f64 = 1e-12;

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn check_alpha(alpha: f64) -> Result<(), QkdError> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(QkdError::InvalidAlpha(alpha))
    }
}

fn check_xi(xi: f64) -> Result<(), QkdError> {
    if xi > 0.0 && xi < 1.0 {
        Ok(())
    } else {
        Err(QkdError::InvalidXi(xi))
    }
}

/// `ξ = α/√(1+α²)`, where the two branch weights of [`purified_sc_rsp`] match.
pub fn bell_condition_xi(alpha: f64) -> f64 {
    alpha / (1.0 + alpha * alpha).sqrt()
}

/// `(α√(1−ξ²)|0⟩|−⟩ + ξ|1⟩|+⟩)/norm` over `[register, node]`.
pub fn purified_sc_rsp(alpha: f64, xi: f64, register: &str, node: &str) -> Result<QuantumState, QkdError> {
    check_xi(xi)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(QkdError::InvalidAlpha(alpha));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = alpha * (1.0 - xi * xi).sqrt();
    let norm = (a * a + xi * xi).sqrt();
    let (a, b) = (a / norm, xi / norm);
    let v = DVector::from_vec(vec![real(a * s), real(-a * s), real(b * s), real(b * s)]);
    Ok(QuantumState::pure(vec![Subsystem::qubit(register), Subsystem::qubit(node)], v, 0.0)?)
}

/// The same register–node state obtained photonically: the client sends
/// `(|0⟩|α⟩ + |1⟩|−α⟩)/√2`, the node emits with bright-state parameter `ξ`,
/// and exactly one photon is counted at the plus port and none at the minus
/// port. Returns `[register "A", node "S"]` and the heralding probability.
pub fn photonic_sc_rsp(alpha: f64, xi: f64, config: &OracleConfig) -> Result<(QuantumState, f64), QkdError> {
    check_xi(xi)?;
    check_alpha(alpha)?;
    let n = config.cutoff;
    let plus = coherent_state("c", real(alpha), n, config.truncation_budget)?;
    let minus = coherent_state("c", real(-alpha), n, config.truncation_budget)?;
    let (Some(p), Some(m)) = (plus.amplitudes(), minus.amplitudes()) else { unreachable!("coherent states are pure") };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = DVector::zeros(2 * (n + 1));
    v.rows_mut(0, n + 1).copy_from(&p.scale(s));
    v.rows_mut(n + 1, n + 1).copy_from(&m.scale(s));
    let client = QuantumState::pure(vec![Subsystem::qubit("A"), Subsystem::mode("c", n)], v, config.truncation_budget)?;
    let joint = tensor(&[&client, &emitter("S", "s", xi, n)?])?;
    let mixed = beamsplitter_5050(&joint, "s", "c")?;
    let out = measure(&mixed, &Measurement::new().on("s", Element::Pnr(1)).on("c", Element::Pnr(0)))?;
    Ok((out.state, out.probability))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

/// Register entangled with a dual-rail pulse over `[register, "a", "b"]`.
///
/// Z basis: `(|0⟩|α,0⟩ + |1⟩|0,α⟩)/√2`. X basis: `(|0⟩|+_α⟩ + |1⟩|−_α⟩)/√2`
/// with `|±_α⟩ = |α/√2⟩|±α/√2⟩`. The register branches are orthogonal, so
/// the only missing norm is the truncated coherent tail.
pub fn purified_dc_states(
    basis: Basis,
    alpha: f64,
    register: &str,
    config: &OracleConfig,
) -> Result<QuantumState, QkdError> {
    check_alpha(alpha)?;
    let n = config.cutoff;
    let coh = |beta: f64| -> Result<DVector<C64>, QkdError> {
        let st = coherent_state("m", real(beta), n, config.truncation_budget)?;
        Ok(st.amplitudes().cloned().unwrap_or_else(|| unreachable!("coherent states are pure")))
    };
    let vacuum = DVector::from_fn(n + 1, |i, _| real(if i == 0 { 1.0 } else { 0.0 }));
    let (k0, k1) = match basis {
        Basis::Z => (coh(alpha)?.kronecker(&vacuum), vacuum.kronecker(&coh(alpha)?)),
        Basis::X => {
            let h = alpha * std::f64::consts::FRAC_1_SQRT_2;
            (coh(h)?.kronecker(&coh(h)?), coh(h)?.kronecker(&coh(-h)?))
        }
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let d = k0.len();
    let mut v = DVector::zeros(2 * d);
    v.rows_mut(0, d).copy_from(&k0.scale(s));
    v.rows_mut(d, d).copy_from(&k1.scale(s));
    Ok(QuantumState::pure(
        vec![Subsystem::qubit(register), Subsystem::mode("a", n), Subsystem::mode("b", n)],
        v,
        2.0 * config.truncation_budget,
    )?)
}

/// One heralded outcome of the rail-wise number-resolving measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DcHerald {
    /// Port that counted the single photon in rail a and in rail b.
    pub pattern: (Port, Port),
    pub probability: f64,
    /// `[register, node]`, register rotated into its measurement frame.
    pub state: QuantumState,
    pub bell: BellState,
    pub bell_fidelity: f64,
}

/// Interferes the client pulse with a node photon `(|0⟩|1,0⟩ + |1⟩|0,1⟩)/√2`
/// rail by rail and keeps outcomes with exactly one photon per rail.
///
/// The X-basis register is rotated by a Hadamard so both bases are reported
/// in the frame their bits are read in.
pub fn dc_bell_projection(basis: Basis, alpha: f64, config: &OracleConfig) -> Result<Vec<DcHerald>, QkdError> {
    let n = config.cutoff;
    let client = purified_dc_states(basis, alpha, "A", config)?;
    let rail = (n + 1) * (n + 1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = DVector::zeros(2 * rail);
    v[n + 1] = real(s); // |0⟩|1,0⟩
    v[rail + 1] = real(s); // |1⟩|0,1⟩
    let node =
        QuantumState::pure(vec![Subsystem::qubit("S"), Subsystem::mode("sa", n), Subsystem::mode("sb", n)], v, 0.0)?;
    let joint = tensor(&[&client, &node])?;
    let mixed = beamsplitter_5050(&beamsplitter_5050(&joint, "sa", "a")?, "sb", "b")?;
    let mut out = Vec::with_capacity(4);
    for pa in [Port::Plus, Port::Minus] {
        for pb in [Port::Plus, Port::Minus] {
            let counts = |port: Port| if port == Port::Plus { (1, 0) } else { (0, 1) };
            let ((a1, a2), (b1, b2)) = (counts(pa), counts(pb));
            let m = Measurement::new()
                .on("sa", Element::Pnr(a1))
                .on("a", Element::Pnr(a2))
                .on("sb", Element::Pnr(b1))
                .on("b", Element::Pnr(b2));
            let c = measure(&mixed, &m)?;
            let state = match basis {
                Basis::Z => c.state,
                Basis::X => apply_gate(&c.state, &Gate::h("A"))?,
            };
            let (bell, bell_fidelity) = nearest_bell(&state)?;
            out.push(DcHerald { pattern: (pa, pb), probability: c.probability, state, bell, bell_fidelity });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus, BellState::PsiMinus];

    pub fn amplitudes(self) -> [C64; 4] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = real(0.0);
        match self {
            BellState::PhiPlus => [real(s), z, z, real(s)],
            BellState::PhiMinus => [real(s), z, z, real(-s)],
            BellState::PsiPlus => [z, real(s), real(s), z],
            BellState::PsiMinus => [z, real(s), real(-s), z],
        }
    }
}

/// Closest Bell state of a two-qubit state and the fidelity to it.
pub fn nearest_bell(state: &QuantumState) -> Result<(BellState, f64), QkdError> {
    let mut best = (BellState::PhiPlus, f64::NEG_INFINITY);
    for b in BellState::ALL {
        let f = crate::fock::fidelity_to_pure(state, &b.amplitudes())?;
        if f > best.1 {
            best = (b, f);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainProtocol {
    #[serde(rename = "sc")]
    ScPurified,
    #[serde(rename = "dc")]
    DcPurified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    /// Intermediate swaps before the final measurement between the two
    /// client-adjacent nodes.
    pub swap_count: usize,
    pub alpha: f64,
    /// Bright-state parameter of both edge nodes (single-click only).
    pub xi: f64,
    pub protocol: ChainProtocol,
    /// Encoding basis of both clients (double-click only).
    pub basis: Basis,
    /// Fock truncation for the double-click photonic step.
    pub fock: OracleConfig,
}

impl ChainConfig {
    pub fn sc(alpha: f64, xi: f64, swap_count: usize) -> Self {
        Self {
            swap_count,
            alpha,
            xi,
            protocol: ChainProtocol::ScPurified,
            basis: Basis::Z,
            fock: OracleConfig::default(),
        }
    }

    /// Single-click chain at `ξ = α/√(1+α²)`.
    pub fn bell_condition(alpha: f64, swap_count: usize) -> Self {
        Self::sc(alpha, bell_condition_xi(alpha), swap_count)
    }

    pub fn dc(alpha: f64, basis: Basis, swap_count: usize) -> Self {
        Self { protocol: ChainProtocol::DcPurified, basis, ..Self::sc(alpha, 0.5, swap_count) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Z,
    /// `X·Z`: Z first.
    XZ,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Z, Pauli::XZ];

    fn apply(self, state: &QuantumState, label: &str) -> Result<QuantumState, FockError> {
        match self {
            Pauli::I => Ok(state.clone()),
            Pauli::X => apply_gate(state, &Gate::x(label)),
            Pauli::Z => apply_gate(state, &Gate::z(label)),
            Pauli::XZ => apply_gate(&apply_gate(state, &Gate::z(label))?, &Gate::x(label)),
        }
    }
}

/// Bell-measurement outcome `(m_c, m_t)` of CNOT, Hadamard on the control and
/// Z readout: `(0,0)` Φ⁺, `(1,0)` Φ⁻, `(0,1)` Ψ⁺, `(1,1)` Ψ⁻.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternRecord {
    pub outcome: (u8, u8),
    pub probability: f64,
    /// Pauli that maps this branch onto the `(0,0)` branch, if any does.
    pub correction: Option<Pauli>,
    /// Overlap with the `(0,0)` branch after the correction (or without one
    /// when none exists).
    pub fidelity_to_canonical: f64,
}

/// State of the two client registers `["A", "B"]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterPair {
    pub state: QuantumState,
}

impl RegisterPair {
    pub fn fidelity(&self, bell: BellState) -> Result<f64, QkdError> {
        Ok(crate::fock::fidelity_to_pure(&self.state, &bell.amplitudes())?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    /// Registers after the canonical final outcome.
    pub pair: RegisterPair,
    /// One entry per intermediate swap; corrections act on the far link qubit.
    pub swaps: Vec<Vec<PatternRecord>>,
    /// Final measurement; corrections act on Bob's register.
    pub final_patterns: Vec<PatternRecord>,
}

/// Bell measurement on `(left, right)`; measured qubits are traced out.
fn bell_measure(
    state: &QuantumState,
    left: &str,
    right: &str,
) -> Result<Vec<((u8, u8), f64, Option<QuantumState>)>, QkdError> {
    let s = apply_gate(&apply_gate(state, &Gate::cnot(left, right))?, &Gate::h(left))?;
    let keep: Vec<String> = s.labels().into_iter().filter(|l| *l != left && *l != right).map(str::to_owned).collect();
    let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
    let mut out = Vec::with_capacity(4);
    for mc in 0..2u8 {
        for mt in 0..2u8 {
            let m = Measurement::new().on(left, Element::Qubit(mc)).on(right, Element::Qubit(mt));
            let p = probability(&s, &m)?;
            let st =
                if p < MIN_PATTERN_PROBABILITY { None } else { Some(partial_trace(&measure(&s, &m)?.state, &keep)?) };
            out.push(((mc, mt), p, st));
        }
    }
    Ok(out)
}

fn overlap(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> f64 {
    (rho * sigma).trace().re
}

/// Finds, per outcome, the Pauli on `target` that reproduces the `(0,0)` branch.
fn resolve(
    outcomes: Vec<((u8, u8), f64, Option<QuantumState>)>,
    target: &str,
) -> Result<(QuantumState, Vec<PatternRecord>), QkdError> {
    let canonical = outcomes
        .iter()
        .find(|(o, _, _)| *o == (0, 0))
        .and_then(|(_, _, s)| s.clone())
        .ok_or(FockError::ImpossibleConditioning(0.0))?;
    let reference = canonical.density();
    let mut records = Vec::with_capacity(outcomes.len());
    for (outcome, p, state) in outcomes {
        let Some(st) = state else {
            records.push(PatternRecord { outcome, probability: p, correction: None, fidelity_to_canonical: 0.0 });
            continue;
        };
        let mut found = None;
        for pauli in Pauli::ALL {
            let rho = pauli.apply(&st, target)?.density();
            let diff = (&rho - &reference).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if diff < SAME_STATE_TOLERANCE {
                found = Some((pauli, overlap(&rho, &reference)));
                break;
            }
        }
        let (correction, fidelity_to_canonical) = match found {
            Some((pauli, f)) => (Some(pauli), f),
            None => (None, overlap(&st.density(), &reference)),
        };
        records.push(PatternRecord { outcome, probability: p, correction, fidelity_to_canonical });
    }
    Ok((canonical, records))
}

fn phi_plus(left: &str, right: &str) -> Result<QuantumState, FockError> {
    let amps = DVector::from_column_slice(&BellState::PhiPlus.amplitudes());
    QuantumState::pure(vec![Subsystem::qubit(left), Subsystem::qubit(right)], amps, 0.0)
}

/// Register–node pair of one client, `[register, node]`.
fn edge_pair(chain: &ChainConfig, register: &str, node: &str) -> Result<QuantumState, QkdError> {
    match chain.protocol {
        ChainProtocol::ScPurified => {
            check_alpha(chain.alpha)?;
            purified_sc_rsp(chain.alpha, chain.xi, register, node)
        }
        ChainProtocol::DcPurified => {
            let heralds = dc_bell_projection(chain.basis, chain.alpha, &chain.fock)?;
            let first = heralds.into_iter().next().ok_or(FockError::ImpossibleConditioning(0.0))?;
            Ok(first.state.relabel("A", register)?.relabel("S", node)?)
        }
    }
}

/// Swaps Alice's register–node entanglement across `swap_count` ideal
/// `|Φ⁺⟩` links, then measures her last node jointly with Bob's node.
///
/// Each intermediate outcome is corrected on the far qubit of the new link;
/// every outcome has a Pauli correction there. The final outcome is corrected
/// on Bob's register. The returned pair is the `(0,0)` final branch.
pub fn swap_and_project(chain: &ChainConfig) -> Result<ChainOutcome, QkdError> {
    let mut state = edge_pair(chain, "A", "n0")?;
    let mut node = "n0".to_owned();
    let mut swaps = Vec::with_capacity(chain.swap_count);
    for i in 0..chain.swap_count {
        let (l, r) = (format!("l{i}"), format!("r{i}"));
        let joint = tensor(&[&state, &phi_plus(&l, &r)?])?;
        let (next, records) = resolve(bell_measure(&joint, &node, &l)?, &r)?;
        state = next;
        node = r;
        swaps.push(records);
    }
    let bob = edge_pair(chain, "B", "nB")?;
    let joint = tensor(&[&state, &bob])?;
    let (pair, final_patterns) = resolve(bell_measure(&joint, &node, "nB")?, "B")?;
    Ok(ChainOutcome { pair: RegisterPair { state: pair.normalized()? }, swaps, final_patterns })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlations {
    /// `P(k_a = k_b)` when both registers are read in Z.
    pub z_agreement: f64,
    /// `⟨X⊗X⟩`.
    pub xx_expectation: f64,
}

pub fn correlation_check(pair: &RegisterPair) -> Correlations {
    let rho = pair.state.density();
    let t = rho.trace().re;
    Correlations {
        z_agreement: (rho[(0, 0)].re + rho[(3, 3)].re) / t,
        xx_expectation: 2.0 * (rho[(0, 3)].re + rho[(1, 2)].re) / t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn schmidt(state: &QuantumState) -> (f64, f64) {
        let v = state.amplitudes().unwrap();
        let m = nalgebra::Matrix2::new(v[0], v[1], v[2], v[3]);
        let sv = m.svd(false, false).singular_values;
        (sv[0].max(sv[1]), sv[0].min(sv[1]))
    }

    #[test]
    fn analytic_state_is_normalized_and_has_the_right_limits() {
        let st = purified_sc_rsp(0.4, 0.3, "A", "S").unwrap();
        assert!((st.trace() - 1.0).abs() < 1e-12);
        let bright = purified_sc_rsp(0.4, 1.0 - 1e-12, "A", "S").unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(
            crate::fock::fidelity_to_pure(&bright, &[real(0.0), real(0.0), real(s), real(s)]).unwrap() > 1.0 - 1e-10
        );
        let (big, small) = schmidt(&purified_sc_rsp(0.7, bell_condition_xi(0.7), "A", "S").unwrap());
        assert_relative_eq!(big, small, epsilon = 1e-12);
        assert!(matches!(purified_sc_rsp(0.4, 1.0, "A", "S"), Err(QkdError::InvalidXi(_))));
    }

    #[test]
    fn photonic_derivation_matches_up_to_local_unitaries() {
        let (alpha, xi) = (0.3, 0.4);
        let (photonic, p) = photonic_sc_rsp(alpha, xi, &OracleConfig::default()).unwrap();
        assert!(p > 0.0);
        // the photonic run carries the |−⟩/|+⟩ labels on the register and
        // the computational labels on the node; H X and X H swap them back
        let node = apply_gate(&apply_gate(&photonic, &Gate::x("S")).unwrap(), &Gate::h("S")).unwrap();
        let both = apply_gate(&apply_gate(&node, &Gate::h("A")).unwrap(), &Gate::x("A")).unwrap();
        let target = purified_sc_rsp(alpha, xi, "A", "S").unwrap();
        let amps: Vec<C64> = target.amplitudes().unwrap().iter().copied().collect();
        assert_relative_eq!(crate::fock::fidelity_to_pure(&both, &amps).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn bell_condition_gives_phi_plus_for_every_chain_length() {
        for alpha in [0.1, 0.3, 0.7] {
            for swaps in 0..=3 {
                let out = swap_and_project(&ChainConfig::bell_condition(alpha, swaps)).unwrap();
                assert_relative_eq!(out.pair.fidelity(BellState::PhiPlus).unwrap(), 1.0, epsilon = 1e-10);
                let c = correlation_check(&out.pair);
                assert_relative_eq!(c.z_agreement, 1.0, epsilon = 1e-10);
                assert!(out.final_patterns.iter().all(|r| r.correction.is_some()));
                assert!(out.swaps.iter().flatten().all(|r| r.correction.is_some()));
            }
        }
    }

    #[test]
    fn generic_xi_follows_the_squared_weights() {
        let (alpha, xi) = (0.5, 0.3);
        let out = swap_and_project(&ChainConfig::sc(alpha, xi, 2)).unwrap();
        let (a, b) = (alpha * alpha * (1.0 - xi * xi), xi * xi);
        let n = (a * a + b * b).sqrt();
        let target = [real(a / n), real(0.0), real(0.0), real(b / n)];
        assert_relative_eq!(crate::fock::fidelity_to_pure(&out.pair.state, &target).unwrap(), 1.0, epsilon = 1e-12);
        assert!(out.pair.fidelity(BellState::PhiPlus).unwrap() < 1.0 - 1e-3);
        // Φ⁻ and Ψ⁻ outcomes herald a Bell state instead, which no Pauli maps
        // onto the unbalanced state
        let fixed: Vec<(u8, u8)> =
            out.final_patterns.iter().filter(|r| r.correction.is_some()).map(|r| r.outcome).collect();
        assert_eq!(fixed, vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn swap_count_does_not_change_the_pair() {
        let base = swap_and_project(&ChainConfig::sc(0.4, 0.25, 0)).unwrap().pair.state.density();
        for swaps in 1..=4 {
            let d = swap_and_project(&ChainConfig::sc(0.4, 0.25, swaps)).unwrap().pair.state.density() - &base;
            assert!(d.iter().all(|z| z.norm() < 1e-10));
        }
    }

    #[test]
    fn pair_is_phi_plus_only_at_the_bell_condition() {
        let alpha = 0.3;
        let f =
            |xi| swap_and_project(&ChainConfig::sc(alpha, xi, 1)).unwrap().pair.fidelity(BellState::PhiPlus).unwrap();
        let xi0 = bell_condition_xi(alpha);
        assert_relative_eq!(f(xi0), 1.0, epsilon = 1e-12);
        assert!(f(xi0 + 1e-2) < 1.0 - 1e-6 && f(xi0 - 1e-2) < 1.0 - 1e-6);
    }

    #[test]
    fn correlations_of_reference_states() {
        let bell = RegisterPair {
            state: QuantumState::pure(
                vec![Subsystem::qubit("A"), Subsystem::qubit("B")],
                DVector::from_column_slice(&BellState::PhiPlus.amplitudes()),
                0.0,
            )
            .unwrap(),
        };
        let c = correlation_check(&bell);
        assert_relative_eq!(c.z_agreement, 1.0, epsilon = 1e-15);
        assert_relative_eq!(c.xx_expectation, 1.0, epsilon = 1e-15);
        let mixed = RegisterPair {
            state: QuantumState::mixed(
                vec![Subsystem::qubit("A"), Subsystem::qubit("B")],
                DMatrix::identity(4, 4).scale(0.25).map(real),
                0.0,
            )
            .unwrap(),
        };
        assert_relative_eq!(correlation_check(&mixed).z_agreement, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn dual_rail_states_are_nearly_normalized_and_balanced() {
        let cfg = OracleConfig::default();
        for basis in [Basis::Z, Basis::X] {
            let st = purified_dc_states(basis, 0.7, "A", &cfg).unwrap();
            assert!(st.norm_deficit().abs() < 1e-10);
        }
        let st = purified_dc_states(Basis::Z, 0.5, "A", &cfg).unwrap();
        let light = partial_trace(&st, &["a", "b"]).unwrap().density();
        let coh = |l| coherent_state(l, real(0.5), cfg.cutoff, 1e-10).unwrap();
        let vac = |l| QuantumState::number(l, 0, cfg.cutoff).unwrap();
        let ka = tensor(&[&coh("a"), &vac("b")]).unwrap().density();
        let kb = tensor(&[&vac("a"), &coh("b")]).unwrap().density();
        let d = light - (ka + kb).scale(0.5);
        assert!(d.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn dual_rail_measurement_heralds_bell_states() {
        let cfg = OracleConfig::default();
        for basis in [Basis::Z, Basis::X] {
            let heralds = dc_bell_projection(basis, 0.3, &cfg).unwrap();
            assert_eq!(heralds.len(), 4);
            for h in &heralds {
                assert_relative_eq!(h.bell_fidelity, 1.0, epsilon = 1e-10);
                assert_relative_eq!(h.probability, heralds[0].probability, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dual_rail_chain_ends_in_a_bell_state() {
        let out = swap_and_project(&ChainConfig::dc(0.3, Basis::Z, 2)).unwrap();
        let (_, f) = nearest_bell(&out.pair.state).unwrap();
        assert_relative_eq!(f, 1.0, epsilon = 1e-10);
        assert!(out.final_patterns.iter().all(|r| r.correction.is_some()));
    }
}
