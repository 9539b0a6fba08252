//! Channels and unitaries acting on a few subsystems of a joint state.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::{check_subsystems, FockError, QuantumState, Repr, Split, Subsystem, SubsystemKind};

/// Sparse operator on the composite space of its target subsystems.
#[derive(Debug, Clone)]
pub(crate) struct LocalOp {
    /// `(row, col, value)`.
    pub entries: Vec<(usize, usize, C64)>,
}

fn left(rho: &DMatrix<C64>, split: &Split, op: &LocalOp) -> DMatrix<C64> {
    let n = rho.nrows();
    let mut out = DMatrix::zeros(n, n);
    let src = rho.as_slice();
    let dst = out.as_mut_slice();
    for col in 0..n {
        let base = col * n;
        for r in 0..split.rest_dim {
            for &(row_t, col_t, v) in &op.entries {
                dst[base + split.at(r, row_t)] += v * src[base + split.at(r, col_t)];
            }
        }
    }
    out
}

/// `rho · op†`.
fn right_adjoint(rho: &DMatrix<C64>, split: &Split, op: &LocalOp) -> DMatrix<C64> {
    let n = rho.nrows();
    let mut out = DMatrix::zeros(n, n);
    let src = rho.as_slice();
    let dst = out.as_mut_slice();
    for r in 0..split.rest_dim {
        for &(row_t, col_t, v) in &op.entries {
            let to = split.at(r, row_t) * n;
            let from = split.at(r, col_t) * n;
            let vc = v.conj();
            for i in 0..n {
                dst[to + i] += vc * src[from + i];
            }
        }
    }
    out
}

fn on_vector(psi: &DVector<C64>, split: &Split, op: &LocalOp) -> DVector<C64> {
    let mut out = DVector::zeros(psi.len());
    for r in 0..split.rest_dim {
        for &(row_t, col_t, v) in &op.entries {
            out[split.at(r, row_t)] += v * psi[split.at(r, col_t)];
        }
    }
    out
}

/// Applies an operator that is unitary on the retained subspace.
pub(crate) fn apply_local(state: &QuantumState, targets: &[usize], op: &LocalOp) -> QuantumState {
    let split = Split::new(&state.dims(), targets);
    let repr = match state.repr() {
        Repr::Pure(v) => Repr::Pure(on_vector(v, &split, op)),
        Repr::Mixed(m) => Repr::Mixed(right_adjoint(&left(m, &split, op), &split, op)),
    };
    QuantumState::from_repr(state.subsystems().to_vec(), repr, state.budget())
}

pub(crate) fn apply_kraus(state: &QuantumState, targets: &[usize], ops: &[LocalOp]) -> QuantumState {
    let split = Split::new(&state.dims(), targets);
    let rho = state.density();
    let n = rho.nrows();
    let mut acc = DMatrix::zeros(n, n);
    for op in ops {
        acc += right_adjoint(&left(&rho, &split, op), &split, op);
    }
    QuantumState::from_repr(state.subsystems().to_vec(), Repr::Mixed(acc), state.budget())
}

fn mode_cutoff(state: &QuantumState, label: &str) -> Result<(usize, usize), FockError> {
    let i = state.position(label)?;
    match state.subsystems()[i].kind {
        SubsystemKind::Mode { cutoff } => Ok((i, cutoff)),
        SubsystemKind::Qubit => Err(FockError::NotAMode(label.to_owned())),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Pure-loss channel of transmissivity `eta` on one mode, as Kraus operators
/// `K_k |n⟩ = sqrt(C(n,k) eta^{n-k} (1-eta)^k) |n-k⟩`. The result is mixed.
pub fn apply_loss(state: &QuantumState, label: &str, eta: f64) -> Result<QuantumState, FockError> {
    if !(0.0..=1.0).contains(&eta) || eta.is_nan() {
        return Err(FockError::InvalidTransmissivity(eta));
    }
    let (i, cutoff) = mode_cutoff(state, label)?;
    let ops: Vec<LocalOp> = (0..=cutoff)
        .map(|k| LocalOp {
            entries: (k..=cutoff)
                .map(|n| {
                    let w = binomial(n, k) * eta.powi((n - k) as i32) * (1.0 - eta).powi(k as i32);
                    (n - k, n, C64::new(w.sqrt(), 0.0))
                })
                .filter(|e| e.2.re != 0.0)
                .collect(),
        })
        .filter(|op| !op.entries.is_empty())
        .collect();
    Ok(apply_kraus(state, &[i], &ops))
}

/// Balanced beamsplitter `a_s† → (a_+† + a_-†)/√2`, `a_c† → (a_+† - a_-†)/√2`.
///
/// Afterwards `mode_s` holds the plus output port and `mode_c` the minus port.
/// The transformation is its own inverse. Output components beyond either
/// cutoff are dropped and must fit inside the state's truncation budget.
pub fn beamsplitter_5050(state: &QuantumState, mode_s: &str, mode_c: &str) -> Result<QuantumState, FockError> {
    if mode_s == mode_c {
        return Err(FockError::DuplicateLabel(mode_s.to_owned()));
    }
    let (is, ns) = mode_cutoff(state, mode_s)?;
    let (ic, nc) = mode_cutoff(state, mode_c)?;
    let op = beamsplitter_op(ns, nc);
    let before = state.trace();
    let out = apply_local(state, &[is, ic], &op);
    let dropped = before - out.trace();
    if dropped > state.budget() + 1e-14 * before {
        return Err(FockError::UnderTruncation { cutoff: ns.min(nc), tail: dropped, budget: state.budget() });
    }
    Ok(out)
}

/// Matrix elements from the binomial expansion of
/// `(a_+† + a_-†)^k (a_+† - a_-†)^m |0⟩ / sqrt(2^{k+m} k! m!)`.
fn beamsplitter_op(ns: usize, nc: usize) -> LocalOp {
    let fact: Vec<f64> = (0..=ns + nc + 1)
        .scan(1.0, |f, n| {
            if n > 0 {
                *f *= n as f64;
            }
            Some(*f)
        })
        .collect();
    let mut entries = Vec::new();
    let mut column = vec![0.0; ns + nc + 1];
    for k in 0..=ns {
        for m in 0..=nc {
            column.iter_mut().for_each(|c| *c = 0.0);
            for i in 0..=k {
                for j in 0..=m {
                    let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
                    column[i + j] += sign * binomial(k, i) * binomial(m, j);
                }
            }
            let norm = (0.5f64).powi((k + m) as i32).sqrt() / (fact[k] * fact[m]).sqrt();
            for (p, &c) in column.iter().enumerate().take(k + m + 1) {
                let q = k + m - p;
                if c == 0.0 || p > ns || q > nc {
                    continue;
                }
                let v = c * norm * (fact[p] * fact[q]).sqrt();
                entries.push((p * (nc + 1) + q, k * (nc + 1) + m, C64::new(v, 0.0)));
            }
        }
    }
    LocalOp { entries }
}

/// Qubit gates.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Cnot { control: String, target: String },
    Single { target: String, matrix: [[C64; 2]; 2] },
}

impl Gate {
    pub fn cnot(control: &str, target: &str) -> Self {
        Gate::Cnot { control: control.to_owned(), target: target.to_owned() }
    }

    pub fn single(target: &str, matrix: [[C64; 2]; 2]) -> Self {
        Gate::Single { target: target.to_owned(), matrix }
    }

    pub fn x(target: &str) -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self::single(target, [[o, l], [l, o]])
    }

    pub fn z(target: &str) -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self::single(target, [[l, o], [o, -l]])
    }

    pub fn h(target: &str) -> Self {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::single(target, [[s, s], [s, -s]])
    }

    /// `diag(1, e^{iφ})`.
    pub fn phase(target: &str, phi: f64) -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self::single(target, [[l, o], [o, C64::from_polar(1.0, phi)]])
    }
}

fn qubit_index(state: &QuantumState, label: &str) -> Result<usize, FockError> {
    let i = state.position(label)?;
    match state.subsystems()[i].kind {
        SubsystemKind::Qubit => Ok(i),
        SubsystemKind::Mode { .. } => Err(FockError::NotAQubit(label.to_owned())),
    }
}

pub fn apply_gate(state: &QuantumState, gate: &Gate) -> Result<QuantumState, FockError> {
    let one = C64::new(1.0, 0.0);
    match gate {
        Gate::Cnot { control, target } => {
            if control == target {
                return Err(FockError::DuplicateLabel(control.clone()));
            }
            let c = qubit_index(state, control)?;
            let t = qubit_index(state, target)?;
            let op = LocalOp { entries: vec![(0, 0, one), (1, 1, one), (3, 2, one), (2, 3, one)] };
            Ok(apply_local(state, &[c, t], &op))
        }
        Gate::Single { target, matrix } => {
            let t = qubit_index(state, target)?;
            let mut entries = Vec::with_capacity(4);
            for (r, row) in matrix.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    if v != C64::new(0.0, 0.0) {
                        entries.push((r, c, v));
                    }
                }
            }
            Ok(apply_local(state, &[t], &LocalOp { entries }))
        }
    }
}

/// Embeds a mode into a larger cutoff, padding with zero amplitudes.
pub fn expand_cutoff(state: &QuantumState, label: &str, cutoff: usize) -> Result<QuantumState, FockError> {
    let (i, old) = mode_cutoff(state, label)?;
    if cutoff < old {
        return Err(FockError::Shape(format!("cannot shrink `{label}` from {old} to {cutoff}")));
    }
    let mut subsystems = state.subsystems().to_vec();
    subsystems[i] = Subsystem::mode(label, cutoff);
    let new_dim = check_subsystems(&subsystems)?;
    let old_split = Split::new(&state.dims(), &[i]);
    let new_dims: Vec<usize> = subsystems.iter().map(Subsystem::dim).collect();
    let new_split = Split::new(&new_dims, &[i]);
    let map: Vec<usize> = {
        let mut m = vec![0; state.dim()];
        for r in 0..old_split.rest_dim {
            for t in 0..=old {
                m[old_split.at(r, t)] = new_split.at(r, t);
            }
        }
        m
    };
    let repr = match state.repr() {
        Repr::Pure(v) => {
            let mut out = DVector::zeros(new_dim);
            for (j, &k) in map.iter().enumerate() {
                out[k] = v[j];
            }
            Repr::Pure(out)
        }
        Repr::Mixed(rho) => {
            let mut out = DMatrix::zeros(new_dim, new_dim);
            for (a, &ka) in map.iter().enumerate() {
                for (b, &kb) in map.iter().enumerate() {
                    out[(ka, kb)] = rho[(a, b)];
                }
            }
            Repr::Mixed(out)
        }
    };
    Ok(QuantumState::from_repr(subsystems, repr, state.budget()))
}

#[cfg(test)]
mod tests {
    use super::super::{coherent_state, tensor};
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn single_photon_splits_evenly_with_signs() {
        let one = QuantumState::number("s", 1, 3).unwrap();
        let vac = QuantumState::number("c", 0, 3).unwrap();
        let st = tensor(&[&one, &vac]).unwrap();
        let out = beamsplitter_5050(&st, "s", "c").unwrap();
        let v = out.amplitudes().unwrap();
        assert_relative_eq!(v[4].re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(v[1].re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);

        let st = tensor(&[&vac.clone().relabel("c", "s").unwrap(), &one.relabel("s", "c").unwrap()]).unwrap();
        let v = beamsplitter_5050(&st, "s", "c").unwrap().amplitudes().unwrap().clone();
        assert_relative_eq!(v[4].re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(v[1].re, -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let a = QuantumState::number("s", 1, 2).unwrap();
        let b = QuantumState::number("c", 1, 2).unwrap();
        let out = beamsplitter_5050(&tensor(&[&a, &b]).unwrap(), "s", "c").unwrap();
        let v = out.amplitudes().unwrap();
        assert!(v[3 + 1].norm() < 1e-15, "|1,1⟩ must vanish");
        assert_relative_eq!(v[2 * 3].norm_sqr() + v[2].norm_sqr(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn coherent_inputs_split_into_coherent_outputs() {
        let b = C64::new(0.4, 0.2);
        let s = coherent_state("s", b, 12, 1e-10).unwrap();
        let cc = coherent_state("c", C64::new(0.0, 0.0), 12, 1e-10).unwrap();
        let out = beamsplitter_5050(&tensor(&[&s, &cc]).unwrap(), "s", "c").unwrap();
        let p = coherent_state("s", b / 2f64.sqrt(), 12, 1e-10).unwrap();
        let m = coherent_state("c", b / 2f64.sqrt(), 12, 1e-10).unwrap();
        let want = tensor(&[&p, &m]).unwrap();
        let err = (out.amplitudes().unwrap() - want.amplitudes().unwrap()).norm();
        // Truncating before and after the splitter differs by the n = 13 amplitude.
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn cutoff_overflow_is_reported() {
        let a = QuantumState::number("s", 2, 2).unwrap();
        let b = QuantumState::number("c", 2, 2).unwrap();
        assert!(matches!(
            beamsplitter_5050(&tensor(&[&a, &b]).unwrap(), "s", "c"),
            Err(FockError::UnderTruncation { .. })
        ));
    }

    #[test]
    fn loss_on_coherent_state_rescales_amplitude() {
        let b = C64::new(0.5, -0.3);
        let s = coherent_state("c", b, 12, 1e-10).unwrap();
        let lossy = apply_loss(&s, "c", 0.37).unwrap();
        let want = coherent_state("c", b * 0.37f64.sqrt(), 12, 1e-10).unwrap();
        assert!(max_diff(&lossy.density(), &want.density()) < 1e-9);
    }

    #[test]
    fn loss_edges() {
        let s = QuantumState::number("c", 3, 4).unwrap();
        let dark = apply_loss(&s, "c", 0.0).unwrap();
        assert_relative_eq!(dark.density()[(0, 0)].re, 1.0, epsilon = 1e-15);
        let id = apply_loss(&s, "c", 1.0).unwrap();
        assert!(max_diff(&id.density(), &s.density()) < 1e-15);
        assert!(matches!(apply_loss(&s, "c", 1.5), Err(FockError::InvalidTransmissivity(_))));
        let q = QuantumState::qubit("q", c(1.0), c(0.0));
        assert!(matches!(apply_loss(&q, "q", 0.5), Err(FockError::NotAMode(_))));
    }

    #[test]
    fn cnot_truth_table() {
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let qa = QuantumState::qubit("a", c((1 - a) as f64), c(a as f64));
            let qb = QuantumState::qubit("b", c((1 - b) as f64), c(b as f64));
            let out = apply_gate(&tensor(&[&qa, &qb]).unwrap(), &Gate::cnot("a", "b")).unwrap();
            let idx = 2 * a + (a ^ b);
            assert_eq!(out.amplitudes().unwrap()[idx], c(1.0));
        }
    }

    #[test]
    fn expand_keeps_amplitudes() {
        let s = coherent_state("c", c(0.2), 4, 1e-3).unwrap();
        let q = QuantumState::qubit("q", c(0.6), c(0.8));
        let st = tensor(&[&s, &q]).unwrap();
        let big = expand_cutoff(&st, "c", 7).unwrap();
        assert_eq!(big.dim(), 16);
        assert_eq!(big.amplitudes().unwrap()[2 * 2 + 1], st.amplitudes().unwrap()[2 * 2 + 1]);
        assert_eq!(big.amplitudes().unwrap()[6 * 2 + 1], c(0.0));
        assert_relative_eq!(big.trace(), st.trace(), max_relative = 1e-15);
    }

    fn random_state(seed: &[f64], ns: usize, nc: usize) -> QuantumState {
        let dim = (ns + 1) * (nc + 1);
        let v = DVector::from_iterator(
            dim,
            (0..dim).map(|i| C64::new(seed[i % seed.len()] * (i as f64 + 1.0).sin(), seed[(i + 1) % seed.len()])),
        );
        let v = v.unscale(v.norm());
        QuantumState::pure(vec![Subsystem::mode("s", ns), Subsystem::mode("c", nc)], v, 0.0).unwrap()
    }

    proptest! {
        #[test]
        fn beamsplitter_is_an_involution(seed in proptest::collection::vec(-1.0f64..1.0, 5)) {
            // Components with at most `n` photons in total never hit the cutoff.
            let n = 4;
            let mut st = random_state(&seed, n, n);
            if let Repr::Pure(v) = &mut st.repr {
                for k in 0..=n {
                    for m in 0..=n {
                        if k + m > n {
                            v[k * (n + 1) + m] = C64::new(0.0, 0.0);
                        }
                    }
                }
            }
            let twice = beamsplitter_5050(&beamsplitter_5050(&st, "s", "c").unwrap(), "s", "c").unwrap();
            let err = (twice.amplitudes().unwrap() - st.amplitudes().unwrap()).norm();
            prop_assert!(err < 1e-12);
        }

        #[test]
        fn loss_preserves_trace_and_positivity(
            seed in proptest::collection::vec(-1.0f64..1.0, 4),
            eta in 0.0f64..=1.0,
        ) {
            let st = random_state(&seed, 3, 2).into_mixed();
            let out = apply_loss(&st, "s", eta).unwrap();
            prop_assert!((out.trace() - st.trace()).abs() < 1e-13);
            prop_assert!(out.hermiticity_error() < 1e-13);
            prop_assert!(out.min_eigenvalue() > -1e-12);
        }

        #[test]
        fn consecutive_losses_compose(eta1 in 0.0f64..=1.0, eta2 in 0.0f64..=1.0) {
            let st = coherent_state("c", C64::new(0.6, 0.1), 12, 1e-8).unwrap();
            let two = apply_loss(&apply_loss(&st, "c", eta1).unwrap(), "c", eta2).unwrap();
            let one = apply_loss(&st, "c", eta1 * eta2).unwrap();
            prop_assert!(max_diff(&two.density(), &one.density()) < 1e-13);
        }
    }
}
