//! Physical parameters shared by every protocol model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rejected physical input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{field} = {value} is outside {range}")]
    OutOfRange { field: &'static str, value: f64, range: &'static str },
    #[error("{field} is not finite")]
    NotFinite { field: &'static str },
    #[error("{0} is undefined without client light (eta_c * eta_d * alpha_sq = 0)")]
    Degenerate(&'static str),
}

/// The three preparation schemes compared by the regime explorer.
///
/// The declaration order doubles as the default tie-break preference:
/// simpler server hardware first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "DC")]
    Dc,
    #[serde(rename = "DSC")]
    Dsc,
    #[serde(rename = "SC")]
    Sc,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Dc, Protocol::Dsc, Protocol::Sc];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Dc => "DC",
            Protocol::Dsc => "DSC",
            Protocol::Sc => "SC",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "DC" => Ok(Protocol::Dc),
            "DSC" => Ok(Protocol::Dsc),
            "SC" => Ok(Protocol::Sc),
            other => Err(format!("unknown protocol `{other}` (expected DC, SC or DSC)")),
        }
    }
}

/// Transmission and source parameters of one preparation attempt.
///
/// `eta_c` and `eta_s` are the client and server channel transmissions and
/// `eta_d` the detector efficiency, folded symmetrically into both arms.
/// `alpha_sq` is the mean photon number of the client pulse before loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub eta_c: f64,
    pub eta_s: f64,
    pub eta_d: f64,
    #[serde(default)]
    pub alpha_sq: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub sigma_sc: f64,
    #[serde(default)]
    pub sigma_dsc: f64,
    /// Server emission amplitude; the optimum for the protocol is used when absent.
    #[serde(default)]
    pub xi: Option<f64>,
}

/// Channel transmissions with the detector efficiency folded in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Efficiencies {
    pub client: f64,
    pub server: f64,
}

impl ProtocolParams {
    pub fn new(eta_c: f64, eta_s: f64, eta_d: f64, alpha_sq: f64) -> Self {
        Self { eta_c, eta_s, eta_d, alpha_sq, theta: 0.0, sigma_sc: 0.0, sigma_dsc: 0.0, xi: None }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_sigmas(mut self, sigma_sc: f64, sigma_dsc: f64) -> Self {
        self.sigma_sc = sigma_sc;
        self.sigma_dsc = sigma_dsc;
        self
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = Some(xi);
        self
    }

    pub fn with_alpha_sq(mut self, alpha_sq: f64) -> Self {
        self.alpha_sq = alpha_sq;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (field, value) in [("eta_c", self.eta_c), ("eta_s", self.eta_s), ("eta_d", self.eta_d)] {
            finite(field, value)?;
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::OutOfRange { field, value, range: "[0, 1]" });
            }
        }
        for (field, value) in [("alpha_sq", self.alpha_sq), ("sigma_sc", self.sigma_sc), ("sigma_dsc", self.sigma_dsc)]
        {
            finite(field, value)?;
            if value < 0.0 {
                return Err(ParamError::OutOfRange { field, value, range: "[0, inf)" });
            }
        }
        finite("theta", self.theta)?;
        if let Some(xi) = self.xi {
            finite("xi", xi)?;
            if !(0.0..=1.0).contains(&xi) {
                return Err(ParamError::OutOfRange { field: "xi", value: xi, range: "[0, 1]" });
            }
        }
        Ok(())
    }

    pub fn effective(&self) -> Efficiencies {
        Efficiencies { client: self.eta_c * self.eta_d, server: self.eta_s * self.eta_d }
    }

    /// Mean photon number of the client pulse that reaches the detectors.
    pub fn detected_mean(&self) -> f64 {
        self.eta_c * self.eta_d * self.alpha_sq
    }
}

fn finite(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NotFinite { field })
    }
}

/// Figures of merit of one protocol at one operating point.
///
/// `success_probability` is the heralding probability per attempt. For DSC it
/// is the heralding probability of a single SC round, and `rate_dimensionless`
/// carries the scheduled two-round rate R·tau. For SC and DC both fields agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolMetrics {
    pub fidelity: f64,
    pub success_probability: f64,
    pub rate_dimensionless: f64,
    pub xi_used: f64,
}
