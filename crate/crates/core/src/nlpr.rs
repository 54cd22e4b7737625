//! Nonlinear phase rotation (NLPR).
//!
//! Kerr nonlinearity in the short, high-power amplifier fiber is modelled as
//! a memoryless rotation `theta_k` proportional to the instantaneous power.
//! The TX pre-rotates by `-kappa theta` and the RX post-rotates by
//! `(kappa - 1) theta`, where each side computes theta from the waveform it
//! can observe.

use crate::error::{invalid, Result};
use crate::signal::Waveform;
use crate::C64;

/// Parameters of the phase model `theta = gamma_eff * l_eff * P * p_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlprSpec {
    /// Fraction of the rotation applied at the TX, in `[0, 1]`.
    pub kappa: f64,
    /// Nonlinear coefficient in 1/(W m), including any polarization factor.
    pub gamma_eff: f64,
    /// Effective length in m.
    pub l_eff: f64,
    /// Launch power (W) corresponding to a unit-mean-power waveform.
    pub reference_power: f64,
}

impl NlprSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(invalid(format!(
                "kappa must lie in [0, 1], got {}",
                self.kappa
            )));
        }
        if !(self.gamma_eff * self.l_eff >= 0.0) || !(self.reference_power >= 0.0) {
            return Err(invalid("NLPR coefficient and reference power must be >= 0"));
        }
        Ok(())
    }

    /// Mean nonlinear phase `gamma_eff * l_eff * P` (rad).
    pub fn mean_phase(&self) -> f64 {
        self.gamma_eff * self.l_eff * self.reference_power
    }
}

/// Nonlinear phase per sample. The waveform is normalized to unit mean power
/// first, so only its shape matters.
pub fn theta(w: &Waveform, spec: &NlprSpec) -> Vec<f64> {
    let p = w.mean_power();
    if p <= 0.0 {
        return vec![0.0; w.len()];
    }
    let k = spec.mean_phase() / p;
    w.instantaneous_power().into_iter().map(|q| k * q).collect()
}

/// Multiplies every sample of both polarizations by `exp(j factor theta_k)`.
pub fn rotate(w: &Waveform, theta: &[f64], factor: f64) -> Waveform {
    let mut out = w.clone();
    let (x, y) = out.pols_mut();
    for ((a, b), t) in x.iter_mut().zip(y.iter_mut()).zip(theta) {
        let r = C64::from_polar(1.0, factor * t);
        *a *= r;
        *b *= r;
    }
    out
}

/// TX pre-rotation `exp(-j kappa theta)`.
pub fn apply_tx_nlpr(w: &Waveform, spec: &NlprSpec) -> Result<Waveform> {
    spec.validate()?;
    Ok(rotate(w, &theta(w, spec), -spec.kappa))
}

/// RX post-rotation `exp(j (kappa - 1) theta)`, theta from the received
/// waveform.
pub fn apply_rx_nlpr(w: &Waveform, spec: &NlprSpec) -> Result<Waveform> {
    spec.validate()?;
    Ok(rotate(w, &theta(w, spec), spec.kappa - 1.0))
}
