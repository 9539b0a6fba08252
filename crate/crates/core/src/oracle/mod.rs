//! Brute-force simulation of the preparation schemes in a truncated Fock space.
//!
//! Nothing here uses the analytic results of [`crate::closed_form`] apart from
//! the default choice of `xi`, which is an input to the physics rather than an
//! output of it. Every state, loss, interference and detection step is carried
//! out explicitly with [`crate::fock`].

mod dc;
mod dsc;
mod noise;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::closed_form;
use crate::fock::{
    apply_gate, apply_loss, beamsplitter_5050, coherent_state, fidelity_to_pure, measure, probability, tensor,
    Conditioned, Element, FockError, Gate, Measurement, QuantumState, Subsystem, DEFAULT_CUTOFF,
    DEFAULT_TRUNCATION_BUDGET,
};
use crate::params::{ParamError, ProtocolParams};

pub use dc::simulate_dc;
pub use dsc::{dsc_branch_acceptance, simulate_dsc, DscConvention, DscRun};
pub use noise::{simulate_with_phase_noise, NoiseAverage, NoisyProtocol, QuadratureConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("phase average with {nodes} nodes moved by {change:e} when doubled")]
    QuadratureUnconverged { nodes: usize, change: f64 },
}

/// Truncation settings for one simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub cutoff: usize,
    pub truncation_budget: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { cutoff: DEFAULT_CUTOFF, truncation_budget: DEFAULT_TRUNCATION_BUDGET }
    }
}

impl OracleConfig {
    pub fn with_cutoff(cutoff: usize) -> Self {
        Self { cutoff, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorModel {
    /// Click / no-click.
    Threshold,
    /// Resolves the photon number; heralding requires exactly one photon.
    NumberResolving,
}

/// Output port of a balanced beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClickPattern {
    Single(Port),
    Double {
        early: Port,
        late: Port,
    },
    /// Two single-click rounds whose CNOT parity check passed.
    OddParity,
}

/// Single-qubit correction applied to a heralded branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    Identity,
    PhaseFlip,
}

impl Correction {
    fn from_minus_count(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Correction::Identity
        } else {
            Correction::PhaseFlip
        }
    }
}

/// Server state heralded by one detection pattern, before correction.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedOutcome {
    pub state: QuantumState,
    pub probability: f64,
    pub click_pattern: ClickPattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub outcome: HeraldedOutcome,
    pub correction: Correction,
}

impl Branch {
    pub fn corrected_state(&self) -> Result<QuantumState, FockError> {
        match self.correction {
            Correction::Identity => Ok(self.outcome.state.clone()),
            Correction::PhaseFlip => {
                let label = self.outcome.state.labels()[0].to_owned();
                apply_gate(&self.outcome.state, &Gate::z(&label))
            }
        }
    }
}

/// All accepted detection patterns of one preparation attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub branches: Vec<Branch>,
    pub xi_used: f64,
}

impl ProtocolRun {
    pub fn success_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.outcome.probability).sum()
    }

    /// Probability-weighted mixture of the corrected branch states.
    pub fn heralded_state(&self) -> Result<QuantumState, FockError> {
        let total = self.success_probability();
        if !(total > 0.0) {
            return Err(FockError::ImpossibleConditioning(total));
        }
        let first = self.branches[0].corrected_state()?;
        // total > 0 implies at least one branch
        let mut rho = first.density().scale(self.branches[0].outcome.probability);
        for b in &self.branches[1..] {
            rho += b.corrected_state()?.density().scale(b.outcome.probability);
        }
        QuantumState::mixed(first.subsystems().to_vec(), rho.unscale(total), first.budget())
    }

    pub fn fidelity(&self, theta: f64) -> Result<f64, FockError> {
        fidelity_to_plus(&self.heralded_state()?, theta)
    }
}

/// Overlap of a single qubit with `|+_θ⟩`.
pub fn fidelity_to_plus(state: &QuantumState, theta: f64) -> Result<f64, FockError> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    fidelity_to_pure(state, &[C64::new(s, 0.0), C64::from_polar(s, theta)])
}

/// One single-click attempt. The client phase is `theta + offset`.
pub(crate) fn sc_round(
    params: &ProtocolParams,
    config: &OracleConfig,
    detector: DetectorModel,
    xi: f64,
    offset: f64,
    qubit: &str,
) -> Result<ProtocolRun, OracleError> {
    let eff = params.effective();
    let n = config.cutoff;
    let server = emitter(qubit, "s", xi, n)?;
    let server = apply_loss(&server, "s", eff.server)?;

    let beta = C64::from_polar(params.alpha_sq.sqrt(), -(params.theta + offset));
    let client = coherent_state("c", beta, n, config.truncation_budget)?;
    let client = apply_loss(&client, "c", eff.client)?;

    let joint = beamsplitter_5050(&tensor(&[&server, &client])?, "s", "c")?;
    let fire = match detector {
        DetectorModel::Threshold => Element::Click,
        DetectorModel::NumberResolving => Element::Pnr(1),
    };
    let mut branches = Vec::with_capacity(2);
    for (port, on, off, minus) in [(Port::Plus, "s", "c", 0), (Port::Minus, "c", "s", 1)] {
        let m = Measurement::new().on(on, fire).on(off, Element::NoClick);
        let Some(out) = herald(&joint, &m)? else { continue };
        branches.push(Branch {
            outcome: HeraldedOutcome {
                state: out.state,
                probability: out.probability,
                click_pattern: ClickPattern::Single(port),
            },
            correction: Correction::from_minus_count(minus),
        });
    }
    Ok(ProtocolRun { branches, xi_used: xi })
}

/// Conditions on `m`, or `None` when the outcome cannot occur.
pub(crate) fn herald(state: &QuantumState, m: &Measurement) -> Result<Option<Conditioned>, FockError> {
    if probability(state, m)? < 1e-15 {
        return Ok(None);
    }
    measure(state, m).map(Some)
}

/// Memory qubit entangled with the presence of a photon,
/// `sqrt(1 - xi^2) |0⟩|0⟩ + xi |1⟩|1⟩`.
pub(crate) fn emitter(qubit: &str, mode: &str, xi: f64, cutoff: usize) -> Result<QuantumState, FockError> {
    let mut v = DVector::zeros(2 * (cutoff + 1));
    v[0] = C64::new((1.0 - xi * xi).sqrt(), 0.0);
    v[cutoff + 2] = C64::new(xi, 0.0);
    QuantumState::pure(vec![Subsystem::qubit(qubit), Subsystem::mode(mode, cutoff)], v, 0.0)
}

/// Single-click scheme with threshold or number-resolving detectors. Uses
/// `params.xi`, or the fidelity optimum (threshold) or balanced `xi` (PNR).
pub fn simulate_sc(
    params: &ProtocolParams,
    config: &OracleConfig,
    detector: DetectorModel,
) -> Result<ProtocolRun, OracleError> {
    params.validate()?;
    let xi = match (params.xi, detector) {
        (Some(xi), _) => xi,
        (None, DetectorModel::Threshold) => closed_form::sc_optimal_xi(params)?,
        (None, DetectorModel::NumberResolving) => closed_form::sc_pnr_balanced_xi(params)?,
    };
    sc_round(params, config, detector, xi, 0.0, "q")
}

pub fn simulate_sc_pnr(params: &ProtocolParams, config: &OracleConfig) -> Result<ProtocolRun, OracleError> {
    simulate_sc(params, config, DetectorModel::NumberResolving)
}
