//! Gaussian phase noise averaged by Gauss–Hermite quadrature.

use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::dsc::{dsc_with_offset, DscConvention};
use super::{fidelity_to_plus, sc_round, DetectorModel, OracleConfig, OracleError};
use crate::closed_form;
use crate::fock::QuantumState;
use crate::params::ProtocolParams;

/// Scheme whose client phase is exposed to drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoisyProtocol {
    /// Phase error `sigma_sc` on the single round.
    Sc,
    /// Phase error `sigma_dsc` on the first of the two rounds.
    Dsc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureConfig {
    pub node_count: usize,
    /// Also evaluate with twice the nodes and fail if the fidelity moves more than 1e-8.
    pub check_convergence: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { node_count: 20, check_convergence: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseAverage {
    pub fidelity: f64,
    pub success_probability: f64,
}

const CONVERGENCE_TOLERANCE: f64 = 1e-8;

/// Averages the heralded state over a phase offset `δ ~ N(0, σ²)`.
///
/// With `∫ e^{-x²} f(x) dx ≈ Σ w_i f(x_i)`, the Gaussian average is
/// `Σ (w_i / √π) f(√2 σ x_i)`. Node results are collected in node order and
/// summed sequentially, so the output does not depend on the thread count.
pub fn simulate_with_phase_noise(
    protocol: NoisyProtocol,
    params: &ProtocolParams,
    config: &OracleConfig,
    quad: &QuadratureConfig,
) -> Result<NoiseAverage, OracleError> {
    params.validate()?;
    let sigma = match protocol {
        NoisyProtocol::Sc => params.sigma_sc,
        NoisyProtocol::Dsc => params.sigma_dsc,
    };
    let avg = average(protocol, params, config, sigma, quad.node_count)?;
    if quad.check_convergence && sigma > 0.0 {
        let fine = average(protocol, params, config, sigma, 2 * quad.node_count)?;
        let change = (fine.fidelity - avg.fidelity).abs();
        if change > CONVERGENCE_TOLERANCE {
            return Err(OracleError::QuadratureUnconverged { nodes: quad.node_count, change });
        }
    }
    Ok(avg)
}

fn average(
    protocol: NoisyProtocol,
    params: &ProtocolParams,
    config: &OracleConfig,
    sigma: f64,
    nodes: usize,
) -> Result<NoiseAverage, OracleError> {
    let points: Vec<(f64, f64)> = if sigma == 0.0 {
        vec![(0.0, 1.0)]
    } else {
        let n = NonZeroUsize::new(nodes).ok_or(OracleError::QuadratureUnconverged { nodes, change: f64::NAN })?;
        let rule = GaussHermite::new(n);
        let norm = std::f64::consts::PI.sqrt();
        rule.iter().map(|&(x, w)| (std::f64::consts::SQRT_2 * sigma * x, w / norm)).collect()
    };
    let xi = match (params.xi, protocol) {
        (Some(xi), _) => Some(xi),
        (None, NoisyProtocol::Sc) => Some(closed_form::sc_optimal_xi(params)?),
        (None, NoisyProtocol::Dsc) => None,
    };
    let samples: Vec<Result<(QuantumState, f64), OracleError>> = points
        .par_iter()
        .map(|&(delta, _)| match protocol {
            NoisyProtocol::Sc => {
                let run = sc_round(params, config, DetectorModel::Threshold, xi.unwrap_or(0.0), delta, "q")?;
                Ok((run.heralded_state()?, run.success_probability()))
            }
            NoisyProtocol::Dsc => {
                let run = dsc_with_offset(params, config, DscConvention::FullPower, delta)?;
                Ok((run.outcome.state, run.rate_dimensionless))
            }
        })
        .collect();
    let mut rho = DMatrix::<C64>::zeros(2, 2);
    let mut prob = 0.0;
    let mut subsystems = None;
    for ((_, w), sample) in points.iter().zip(samples) {
        let (state, p) = sample?;
        rho += state.density().scale(*w);
        prob += w * p;
        subsystems.get_or_insert_with(|| state.subsystems().to_vec());
    }
    let state = QuantumState::mixed(subsystems.unwrap_or_default(), rho, config.truncation_budget)?;
    Ok(NoiseAverage { fidelity: fidelity_to_plus(&state, params.theta)?, success_probability: prob })
}
