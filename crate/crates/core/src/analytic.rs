//! Closed-form long-time amplitudes and residue-sum reconstruction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::SystemConfig;
use crate::spectral::{self, CaseLabel, ModeSet, ModeSource};
use crate::{Error, Result};

/// Weight of the `2 k pi` static mode:
/// `1 / (1 + (Gamma tau0 / 2) sum_{m,n} [(m + n) - |m - n|])`.
pub fn even_static_weight(n_points: usize, gamma_tau0: f64) -> f64 {
    let mut sum = 0.0;
    for m in 1..=n_points {
        for n in 1..=n_points {
            sum += (m + n) as f64 - m.abs_diff(n) as f64;
        }
    }
    1.0 / (1.0 + 0.5 * gamma_tau0 * sum)
}

/// Weight of the `(2 k + 1) pi` static mode, where every delay picks up the
/// sign `(-1)^d`.
pub fn odd_static_weight(n_points: usize, gamma_tau0: f64) -> f64 {
    let sign = |d: usize| if d.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut sum = 0.0;
    for m in 1..=n_points {
        for n in 1..=n_points {
            let direct = m.abs_diff(n);
            sum += sign(m + n) * (m + n) as f64 - sign(direct) * direct as f64;
        }
    }
    1.0 / (1.0 + 0.5 * gamma_tau0 * sum)
}

/// Weight of a cotangent-condition mode at `omega` with period `P`:
/// `2 sin^2(omega / 2) / (2 sin^2(omega / 2) + P Gamma tau0)`.
pub fn cotangent_weight(omega_tau0: f64, period: usize, gamma_tau0: f64) -> f64 {
    let s2 = 2.0 * (0.5 * omega_tau0).sin().powi(2);
    s2 / (s2 + period as f64 * gamma_tau0)
}

/// Closed-form weight of a classified mode.
pub fn closed_form_weight(config: &SystemConfig, omega_tau0: f64, source: ModeSource) -> f64 {
    let n = config.n_points();
    let g = config.gamma_tau0();
    match source {
        ModeSource::Cond2kPi => even_static_weight(n, g),
        ModeSource::CondOddPi => odd_static_weight(n, g),
        ModeSource::CondN => cotangent_weight(omega_tau0, n, g),
        ModeSource::CondNPlus1 => cotangent_weight(omega_tau0, n + 1, g),
    }
}

/// Long-time weight of the bound mode produced by `source`.
pub fn static_amplitude(config: &SystemConfig, source: ModeSource) -> Result<f64> {
    let set = spectral::classify(config);
    let mode = set
        .modes
        .iter()
        .find(|m| m.source == source)
        .ok_or_else(|| Error::ConditionNotMet(format!("no {source:?} mode at omega0 tau0 = {}", config.omega0_tau0())))?;
    Ok(closed_form_weight(config, mode.omega_tau0, source))
}

/// `eps(t) = sum_k A_k exp(-i omega_k t)`, with `t` in units of `tau0`.
pub fn multi_mode_amplitude(modes: &ModeSet, t: f64) -> Complex64 {
    modes
        .modes
        .iter()
        .map(|m| m.weight * Complex64::from_polar(1.0, -m.omega_tau0 * t))
        .sum()
}

/// `|eps(t)|^2` written as a constant plus pairwise cosines, for real
/// weights `A_k` at frequencies `omega_k`.
pub fn expanded_probability(weights: &[f64], omegas: &[f64], t: f64) -> f64 {
    assert_eq!(weights.len(), omegas.len());
    let mut p: f64 = weights.iter().map(|a| a * a).sum();
    for j in 0..weights.len() {
        for k in j + 1..weights.len() {
            p += 2.0 * weights[j] * weights[k] * ((omegas[k] - omegas[j]) * t).cos();
        }
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeMetrics {
    /// Amplitude `2 A0 (A1 + A2)` of the cosine at the mode spacing.
    pub amp_slow: f64,
    /// Amplitude `2 A1 A2` of the cosine at twice the spacing.
    pub amp_fast: f64,
    pub delta_a: f64,
    /// Mode spacing `Upsilon` in units of `1 / tau0`.
    pub upsilon: f64,
}

/// Amplitudes of the two cosines in the three-mode probability. `A0` is the
/// central mode, `A1` and `A2` the side modes.
pub fn envelope_metrics(modes: &ModeSet) -> Result<EnvelopeMetrics> {
    if modes.case_label != CaseLabel::ThreeMode {
        return Err(Error::WrongCase {
            expected: "ThreeMode",
            got: format!("{:?}", modes.case_label),
        });
    }
    let [low, mid, high] = [&modes.modes[0], &modes.modes[1], &modes.modes[2]];
    Ok(envelope_from_weights(
        mid.weight.re,
        low.weight.re,
        high.weight.re,
        0.5 * (high.omega_tau0 - low.omega_tau0),
    ))
}

pub fn envelope_from_weights(a0: f64, a1: f64, a2: f64, upsilon: f64) -> EnvelopeMetrics {
    let amp_slow = 2.0 * a0 * (a1 + a2);
    let amp_fast = 2.0 * a1 * a2;
    EnvelopeMetrics { amp_slow, amp_fast, delta_a: (amp_slow - amp_fast).abs(), upsilon }
}

/// Inverse Laplace transform truncated to `poles`:
/// `eps(t) = sum_k exp(s_k t) / F'(s_k)`.
pub fn residue_amplitude(poles: &[Complex64], config: &SystemConfig, t: f64) -> Complex64 {
    poles
        .iter()
        .map(|&s| spectral::residue_weight(s, config) * (s * t).exp())
        .sum()
}

/// Bound-mode superposition that the amplitude approaches at long times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongTimeAmplitude {
    pub modes: ModeSet,
}

impl LongTimeAmplitude {
    pub fn new(config: &SystemConfig) -> Self {
        LongTimeAmplitude { modes: spectral::classify(config) }
    }

    pub fn evaluate(&self, t: f64) -> Complex64 {
        multi_mode_amplitude(&self.modes, t)
    }

    pub fn probability(&self, t: f64) -> f64 {
        self.evaluate(t).norm_sqr()
    }

    /// Upper bound `sum_k |A_k|` on the amplitude modulus.
    pub fn bound(&self) -> f64 {
        self.modes.modes.iter().map(|m| m.weight.norm()).sum()
    }

    /// Long-time average of `|eps|^2`, i.e. `sum_k |A_k|^2`.
    pub fn mean_probability(&self) -> f64 {
        self.modes.modes.iter().map(|m| m.weight.norm_sqr()).sum()
    }
}
