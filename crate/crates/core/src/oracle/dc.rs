//! Double-click scheme as two sequential time-bin interference stages.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use super::{herald, Branch, ClickPattern, Correction, HeraldedOutcome, OracleConfig, OracleError, Port, ProtocolRun};
use crate::fock::{
    apply_loss, beamsplitter_5050, coherent_state, expand_cutoff, tensor, Element, Measurement, QuantumState, Subsystem,
};
use crate::params::ProtocolParams;

/// The server emits `(|0⟩|0_e 1_l⟩ + |1⟩|1_e 0_l⟩)/√2`; the client sends
/// `|α e^{-iθ}/√2⟩_e |α/√2⟩_l`. Success needs exactly one of the two
/// detectors to click in each bin. The late server mode starts with cutoff 1
/// (it holds at most one photon) and is widened only for its own stage.
pub fn simulate_dc(params: &ProtocolParams, config: &OracleConfig) -> Result<ProtocolRun, OracleError> {
    params.validate()?;
    let eff = params.effective();
    let n = config.cutoff;
    let s = std::f64::consts::FRAC_1_SQRT_2;

    // index = q * (n+1) * 2 + early * 2 + late
    let mut v = DVector::zeros(2 * (n + 1) * 2);
    v[1] = C64::new(s, 0.0);
    v[(n + 1) * 2 + 2] = C64::new(s, 0.0);
    let server =
        QuantumState::pure(vec![Subsystem::qubit("q"), Subsystem::mode("se", n), Subsystem::mode("sl", 1)], v, 0.0)?;
    let server = apply_loss(&apply_loss(&server, "se", eff.server)?, "sl", eff.server)?;

    let amp = (params.alpha_sq / 2.0).sqrt();
    let early = coherent_state("ce", C64::from_polar(amp, -params.theta), n, config.truncation_budget)?;
    let late = coherent_state("cl", C64::new(amp, 0.0), n, config.truncation_budget)?;
    let early = apply_loss(&early, "ce", eff.client)?;
    let late = apply_loss(&late, "cl", eff.client)?;

    let stage1 = beamsplitter_5050(&tensor(&[&server, &early])?, "se", "ce")?;
    let mut branches = Vec::with_capacity(4);
    for (pe, on, off) in ports("se", "ce") {
        let m = Measurement::new().on(on, Element::Click).on(off, Element::NoClick);
        let Some(first) = herald(&stage1, &m)? else { continue };
        let rest = expand_cutoff(&first.state, "sl", n)?;
        let stage2 = beamsplitter_5050(&tensor(&[&rest, &late])?, "sl", "cl")?;
        for (pl, on, off) in ports("sl", "cl") {
            let m = Measurement::new().on(on, Element::Click).on(off, Element::NoClick);
            let Some(second) = herald(&stage2, &m)? else { continue };
            let minus = [pe, pl].iter().filter(|&&p| p == Port::Minus).count();
            branches.push(Branch {
                outcome: HeraldedOutcome {
                    state: second.state,
                    probability: first.probability * second.probability,
                    click_pattern: ClickPattern::Double { early: pe, late: pl },
                },
                correction: Correction::from_minus_count(minus),
            });
        }
    }
    Ok(ProtocolRun { branches, xi_used: s })
}

fn ports<'a>(server: &'a str, client: &'a str) -> [(Port, &'a str, &'a str); 2] {
    [(Port::Plus, server, client), (Port::Minus, client, server)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn matches_closed_form() {
        let p = ProtocolParams::new(0.224, 0.091, 1.0, 0.1);
        let run = simulate_dc(&p, &OracleConfig::default()).unwrap();
        let m = closed_form::dc_metrics(&p).unwrap();
        assert_relative_eq!(run.fidelity(0.0).unwrap(), m.fidelity, epsilon = 1e-8);
        assert_relative_eq!(run.success_probability(), m.success_probability, epsilon = 1e-8);
    }

    #[test]
    fn fidelity_is_invariant_under_theta() {
        let cfg = OracleConfig::default();
        let p = ProtocolParams::new(0.5, 0.3, 0.8, 0.2);
        let f0 = simulate_dc(&p, &cfg).unwrap().fidelity(0.0).unwrap();
        for theta in [PI / 2.0, PI] {
            let f = simulate_dc(&p.with_theta(theta), &cfg).unwrap().fidelity(theta).unwrap();
            assert_relative_eq!(f, f0, epsilon = 1e-12);
        }
    }

    #[test]
    fn every_pattern_prepares_the_same_state_after_correction() {
        let p = ProtocolParams::new(0.5, 0.3, 0.8, 0.2).with_theta(1.1);
        let run = simulate_dc(&p, &OracleConfig::default()).unwrap();
        let reference = run.branches[0].corrected_state().unwrap().density();
        for b in &run.branches[1..] {
            let d = b.corrected_state().unwrap().density() - &reference;
            assert!(d.iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn needs_client_light() {
        let p = ProtocolParams::new(0.5, 0.3, 0.8, 0.0);
        let run = simulate_dc(&p, &OracleConfig::default()).unwrap();
        assert_eq!(run.success_probability(), 0.0);
        assert!(run.heralded_state().is_err());
    }
}
