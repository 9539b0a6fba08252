//! Analytic fidelities, heralding probabilities and rates.
//!
//! Throughout, `x = eta_c * eta_d * |alpha|^2` is the detected client mean
//! photon number and `A = 1 - e^{-x/2}` the probability that half of that
//! light clicks a threshold detector. Detector efficiency is folded into both
//! arms before any formula is applied.
//!
//! All single-click expressions derive from the unnormalized heralded state
//!
//! ```text
//! rho_SC ∝ a |0⟩⟨0| + b |1⟩⟨1| + c (e^{iθ} |1⟩⟨0| + h.c.)
//! a = A (1 - u),  b = u E,  c = sqrt(x eta_s u (1 - u)) / 2,  u = xi^2
//! E = eta_s (1 + x/2) / 2 + (1 - eta_s) A
//! ```
//!
//! heralded by one port with probability `e^{-x/2} (a + b)`.

use std::f64::consts::PI;

use crate::params::{ParamError, Protocol, ProtocolMetrics, ProtocolParams};

/// Quantities shared by the single-click family at one operating point.
#[derive(Debug, Clone, Copy)]
struct ScLight {
    x: f64,
    eta_s: f64,
    /// `1 - e^{-x/2}`.
    a: f64,
    /// Server-photon-present herald weight per unit `u`.
    e: f64,
}

impl ScLight {
    fn new(params: &ProtocolParams) -> Self {
        let x = params.detected_mean();
        let eta_s = params.effective().server;
        let a = -(-x / 2.0).exp_m1();
        let e = eta_s * (1.0 + x / 2.0) / 2.0 + (1.0 - eta_s) * a;
        Self { x, eta_s, a, e }
    }

    fn branch(&self, u: f64) -> (f64, f64, f64) {
        let a = self.a * (1.0 - u);
        let b = u * self.e;
        let c = (self.x * self.eta_s * u * (1.0 - u)).sqrt() / 2.0;
        (a, b, c)
    }

    /// Total heralding probability of one SC round (both ports).
    fn herald(&self, u: f64) -> f64 {
        let (a, b, _) = self.branch(u);
        2.0 * (-self.x / 2.0).exp() * (a + b)
    }

    fn fidelity(&self, u: f64) -> f64 {
        let (a, b, c) = self.branch(u);
        if a + b == 0.0 {
            return 0.5;
        }
        0.5 + c / (a + b)
    }
}

/// Normalized single-qubit state `p0|0⟩⟨0| + p1|1⟩⟨1| + c(e^{iθ}|1⟩⟨0| + h.c.)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquatorialQubit {
    pub p0: f64,
    pub p1: f64,
    pub coherence: f64,
    pub theta: f64,
}

impl EquatorialQubit {
    /// Overlap with `|+_θ⟩` for the state's own `θ`.
    pub fn fidelity(&self) -> f64 {
        0.5 * (self.p0 + self.p1) + self.coherence
    }
}

/// Double-click scheme: both time bins must click exactly one detector.
pub fn dc_metrics(params: &ProtocolParams) -> Result<ProtocolMetrics, ParamError> {
    params.validate()?;
    let x = params.detected_mean();
    let eta_s = params.effective().server;
    let y = x / 4.0;
    let g = -(-y).exp_m1();
    let bin = eta_s / 2.0 * (1.0 + y) + (1.0 - eta_s) * g;
    let fidelity = if x == 0.0 { 1.0 } else { 0.5 * (1.0 + (eta_s * x / 8.0) / (g * bin)) };
    let p = 4.0 * (-x / 2.0).exp() * g * bin;
    Ok(ProtocolMetrics {
        fidelity,
        success_probability: p,
        rate_dimensionless: p,
        xi_used: std::f64::consts::FRAC_1_SQRT_2,
    })
}

/// Fidelity-maximizing server amplitude `xi` for a single-click round.
pub fn sc_optimal_xi(params: &ProtocolParams) -> Result<f64, ParamError> {
    params.validate()?;
    let l = ScLight::new(params);
    if l.x == 0.0 {
        return Err(ParamError::Degenerate("the optimal SC xi"));
    }
    let c = l.eta_s * ((1.0 + l.x / 2.0) / 2.0 - l.a);
    Ok((l.a / (2.0 * l.a + c)).sqrt())
}

fn resolve_xi(params: &ProtocolParams, optimum: impl Fn() -> Result<f64, ParamError>) -> Result<f64, ParamError> {
    params.validate()?;
    match params.xi {
        Some(xi) => Ok(xi),
        None => optimum(),
    }
}

/// Single-click scheme with threshold detectors, at `params.xi` or the optimum.
pub fn sc_metrics(params: &ProtocolParams) -> Result<ProtocolMetrics, ParamError> {
    let xi = resolve_xi(params, || sc_optimal_xi(params))?;
    let l = ScLight::new(params);
    let u = xi * xi;
    let p = l.herald(u);
    Ok(ProtocolMetrics { fidelity: l.fidelity(u), success_probability: p, rate_dimensionless: p, xi_used: xi })
}

/// Heralded single-click state after the port-dependent correction.
pub fn sc_state(params: &ProtocolParams) -> Result<EquatorialQubit, ParamError> {
    let xi = resolve_xi(params, || sc_optimal_xi(params))?;
    let l = ScLight::new(params);
    let (a, b, c) = l.branch(xi * xi);
    let n = a + b;
    if n == 0.0 {
        return Err(ParamError::Degenerate("the SC heralded state"));
    }
    Ok(EquatorialQubit { p0: a / n, p1: b / n, coherence: c / n, theta: params.theta })
}

/// Rate-maximizing `xi` for DSC: maximizes `p * P_CNOT`, i.e. `ab / (a + b)`.
pub fn dsc_optimal_xi(params: &ProtocolParams) -> Result<f64, ParamError> {
    params.validate()?;
    let l = ScLight::new(params);
    if l.x == 0.0 {
        return Err(ParamError::Degenerate("the optimal DSC xi"));
    }
    Ok((l.a / (l.a + (l.a * l.e).sqrt())).sqrt())
}

/// Odd-parity post-selection probability after the CNOT.
fn cnot_acceptance(l: &ScLight, u: f64) -> f64 {
    let (a, b, _) = l.branch(u);
    2.0 * a * b / ((a + b) * (a + b))
}

/// Mean rate of a scheme needing two SC successes then a post-selection
/// accepted with probability `p_cnot`, each SC round succeeding with `p`.
///
/// `1/(2p - p^2)` attempts until the first of two parallel rounds succeeds,
/// then `1/p` for the other.
pub fn scheduled_rate(p: f64, p_cnot: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    p_cnot * p * (2.0 - p) / (3.0 - p)
}

/// Double-single-click scheme. Each SC round uses the full client `|alpha|^2`;
/// the CNOT keeps the odd-emission branch, so the fidelity is independent of xi.
pub fn dsc_metrics(params: &ProtocolParams) -> Result<ProtocolMetrics, ParamError> {
    let xi = resolve_xi(params, || dsc_optimal_xi(params))?;
    let l = ScLight::new(params);
    let u = xi * xi;
    let fidelity = if l.x == 0.0 { 1.0 } else { 0.5 * (1.0 + l.eta_s * l.x / (4.0 * l.a * l.e)) };
    let p = l.herald(u);
    let p_cnot = cnot_acceptance(&l, u);
    Ok(ProtocolMetrics { fidelity, success_probability: p, rate_dimensionless: scheduled_rate(p, p_cnot), xi_used: xi })
}

/// Small-`p` limit of the DSC rate at the rate-optimal xi,
/// `(8/3) e^{-x/2} A E / (sqrt A + sqrt E)^2`.
pub fn dsc_rate_leading_order(params: &ProtocolParams) -> Result<f64, ParamError> {
    params.validate()?;
    let l = ScLight::new(params);
    let s = l.a.sqrt() + l.e.sqrt();
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok(8.0 / 3.0 * (-l.x / 2.0).exp() * l.a * l.e / (s * s))
}

/// Balanced `xi` for the number-resolving single-click scheme:
/// equal client and server single-photon weights, `xi^2 = x / (eta_s + x)`.
pub fn sc_pnr_balanced_xi(params: &ProtocolParams) -> Result<f64, ParamError> {
    params.validate()?;
    let x = params.detected_mean();
    let eta_s = params.effective().server;
    if x + eta_s == 0.0 {
        return Err(ParamError::Degenerate("the balanced PNR xi"));
    }
    Ok((x / (eta_s + x)).sqrt())
}

/// Single-click scheme with number-resolving detectors: exactly one photon on
/// the heralding port and none on the other.
pub fn sc_pnr_metrics(params: &ProtocolParams) -> Result<ProtocolMetrics, ParamError> {
    let xi = resolve_xi(params, || sc_pnr_balanced_xi(params))?;
    let x = params.detected_mean();
    let eta_s = params.effective().server;
    let u = xi * xi;
    let w0 = (1.0 - u) * x;
    let w1 = eta_s * u;
    let lost = (1.0 - eta_s) * u * x;
    let n = w0 + w1 + lost;
    let fidelity = if n == 0.0 { 0.5 } else { 0.5 + (w0 * w1).sqrt() / n };
    let p = (-x).exp() * n;
    Ok(ProtocolMetrics { fidelity, success_probability: p, rate_dimensionless: p, xi_used: xi })
}

/// Contraction of the equatorial coherence under a Gaussian phase error.
pub fn phase_noise_factor(sigma: f64) -> f64 {
    (-sigma * sigma / 2.0).exp()
}

/// Fidelity after a Gaussian phase error of standard deviation `sigma`:
/// the `|+_θ⟩` overlap in excess of 1/2 shrinks by `e^{-sigma^2/2}`.
pub fn apply_phase_noise(fidelity: f64, sigma: f64) -> f64 {
    0.5 + (fidelity - 0.5) * phase_noise_factor(sigma)
}

/// Phase spread accumulated by a laser of linewidth `linewidth_hz` over
/// `interval_s`, `sqrt(2 pi Δν T)`.
pub fn sigma_dsc_estimate(linewidth_hz: f64, interval_s: f64) -> Result<f64, ParamError> {
    for (field, value) in [("linewidth", linewidth_hz), ("interval", interval_s)] {
        if !value.is_finite() {
            return Err(ParamError::NotFinite { field });
        }
        if value < 0.0 {
            return Err(ParamError::OutOfRange { field, value, range: "[0, inf)" });
        }
    }
    Ok((2.0 * PI * linewidth_hz * interval_s).sqrt())
}

/// Metrics of `protocol` including its phase noise: `sigma_sc` for SC,
/// `sigma_dsc` for DSC and none for DC.
pub fn evaluate(protocol: Protocol, params: &ProtocolParams) -> Result<ProtocolMetrics, ParamError> {
    let mut m = match protocol {
        Protocol::Dc => dc_metrics(params)?,
        Protocol::Sc => sc_metrics(params)?,
        Protocol::Dsc => dsc_metrics(params)?,
    };
    let sigma = match protocol {
        Protocol::Dc => 0.0,
        Protocol::Sc => params.sigma_sc,
        Protocol::Dsc => params.sigma_dsc,
    };
    m.fidelity = apply_phase_noise(m.fidelity, sigma);
    Ok(m)
}

/// Leading small-`|alpha|^2` behaviour, `1 - F ≈ infidelity_slope |alpha|^2`
/// and `R tau ≈ rate_slope |alpha|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptotics {
    pub infidelity_slope: f64,
    pub rate_slope: f64,
}

pub fn asymptotics(protocol: Protocol, params: &ProtocolParams) -> Result<Asymptotics, ParamError> {
    params.validate()?;
    let eff = params.effective();
    let (c, s) = (eff.client, eff.server);
    let base = c * (4.0 - 3.0 * s) / (16.0 * s);
    Ok(match protocol {
        Protocol::Sc => Asymptotics { infidelity_slope: base, rate_slope: 2.0 * c },
        Protocol::Dc => Asymptotics { infidelity_slope: base, rate_slope: c * s / 2.0 },
        Protocol::Dsc => Asymptotics { infidelity_slope: 2.0 * base, rate_slope: 4.0 / 3.0 * c },
    })
}

pub fn sc_pnr_asymptotics(params: &ProtocolParams) -> Result<Asymptotics, ParamError> {
    params.validate()?;
    let eff = params.effective();
    Ok(Asymptotics {
        infidelity_slope: eff.client * (1.0 - eff.server) / (4.0 * eff.server),
        rate_slope: 2.0 * eff.client,
    })
}
