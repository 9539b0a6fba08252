//! Remote state preparation of single-qubit states with weak coherent pulses.
//!
//! A client sends phase-encoded coherent pulses and a server interferes them
//! with photons entangled with its memory qubit. A heralding detection leaves
//! the memory in (approximately) `|+_θ⟩ = (|0⟩ + e^{iθ}|1⟩)/√2`.
//!
//! The crate provides two independent routes to the same figures of merit:
//!
//! * [`closed_form`]: analytic fidelities, heralding probabilities and rates
//!   for the dual-click (DC), single-click (SC), double-single-click (DSC) and
//!   photon-number-resolving single-click schemes, plus Gaussian phase noise.
//! * [`oracle`]: brute-force simulation of the same optical circuits in a
//!   truncated Fock space built from [`fock`].
//!
//! [`regime`] sweeps parameters and picks the best scheme per operating point,
//! and [`qkd`] checks the purified, entanglement-based view of the protocols.

pub mod closed_form;
pub mod fock;
pub mod oracle;
pub mod params;
pub mod qkd;
pub mod regime;

pub use num_complex::Complex64 as C64;
pub use params::{Efficiencies, ParamError, Protocol, ProtocolMetrics, ProtocolParams};
