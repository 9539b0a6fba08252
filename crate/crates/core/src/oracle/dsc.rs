//! Double-single-click scheme: two SC rounds, a CNOT and a parity check.

use num_complex::Complex64 as C64;

use super::{sc_round, ClickPattern, DetectorModel, HeraldedOutcome, OracleConfig, OracleError};
use crate::closed_form;
use crate::fock::{apply_gate, measure, partial_trace, probability, tensor, Element, Gate, Measurement, QuantumState};
use crate::params::ProtocolParams;

/// Client light per SC round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DscConvention {
    /// Each round uses the full `|alpha|^2` (the adopted convention).
    FullPower,
    /// Each round uses `|alpha|^2 / 2`.
    SplitPulse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DscRun {
    /// Final qubit after the parity check; `probability` is the acceptance.
    pub outcome: HeraldedOutcome,
    /// Heralding probability of one SC round.
    pub round_probability: f64,
    pub rate_dimensionless: f64,
    pub xi_used: f64,
}

/// Runs the first round at the client phase `theta + offset` and the second at
/// phase zero, so the surviving coherence carries `theta + offset`.
pub(crate) fn dsc_with_offset(
    params: &ProtocolParams,
    config: &OracleConfig,
    convention: DscConvention,
    offset: f64,
) -> Result<DscRun, OracleError> {
    params.validate()?;
    let round = match convention {
        DscConvention::FullPower => *params,
        DscConvention::SplitPulse => params.with_alpha_sq(params.alpha_sq / 2.0),
    };
    let xi = match params.xi {
        Some(xi) => xi,
        None => closed_form::dsc_optimal_xi(&round)?,
    };
    let first = sc_round(&round, config, DetectorModel::Threshold, xi, offset, "q1")?;
    let second = sc_round(&round.with_theta(0.0), config, DetectorModel::Threshold, xi, 0.0, "q2")?;
    let p = first.success_probability();
    let pair = tensor(&[&first.heralded_state()?, &second.heralded_state()?])?;
    let pair = apply_gate(&pair, &Gate::cnot("q1", "q2"))?;
    let accept = Measurement::new().on("q2", Element::Qubit(1));
    let kept = measure(&pair, &accept)?;
    let state = partial_trace(&kept.state, &["q1"])?;
    let p_cnot = kept.probability;
    let rate = if p > 0.0 { p_cnot / (1.0 / (2.0 * p - p * p) + 1.0 / p) } else { 0.0 };
    Ok(DscRun {
        outcome: HeraldedOutcome { state, probability: p_cnot, click_pattern: ClickPattern::OddParity },
        round_probability: p,
        rate_dimensionless: rate,
        xi_used: xi,
    })
}

pub fn simulate_dsc(
    params: &ProtocolParams,
    config: &OracleConfig,
    convention: DscConvention,
) -> Result<DscRun, OracleError> {
    dsc_with_offset(params, config, convention, 0.0)
}

/// Acceptance probability of the parity check for each computational input
/// `|ab⟩`, as `((a, b), probability)`.
pub fn dsc_branch_acceptance() -> Result<Vec<((u8, u8), f64)>, OracleError> {
    let (zero, one) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let basis = |label: &str, bit: u8| {
        if bit == 0 {
            QuantumState::qubit(label, one, zero)
        } else {
            QuantumState::qubit(label, zero, one)
        }
    };
    let mut out = Vec::with_capacity(4);
    for a in 0..2u8 {
        for b in 0..2u8 {
            let pair = tensor(&[&basis("q1", a), &basis("q2", b)])?;
            let pair = apply_gate(&pair, &Gate::cnot("q1", "q2"))?;
            out.push(((a, b), probability(&pair, &Measurement::new().on("q2", Element::Qubit(1)))?));
        }
    }
    Ok(out)
}
