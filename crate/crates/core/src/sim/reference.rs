use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::SimError;

/// One term `a·sin(ωt + ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
}

/// One reference channel: `offset + Σ a_i·sin(ω_i t + ψ_i)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Channel {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub terms: Vec<SineTerm>,
}

impl Channel {
    pub fn sine(freq: f64) -> Self {
        Self { offset: 0.0, terms: vec![SineTerm { amplitude: 1.0, freq, phase: 0.0 }] }
    }

    pub fn cosine(freq: f64) -> Self {
        Self { offset: 0.0, terms: vec![SineTerm { amplitude: 1.0, freq, phase: FRAC_PI_2 }] }
    }

    pub fn constant(c: f64) -> Self {
        Self { offset: c, terms: Vec::new() }
    }

    /// `k`-th derivative at `t`.
    pub fn deriv(&self, t: f64, k: usize) -> f64 {
        let osc: f64 = self
            .terms
            .iter()
            .map(|s| s.amplitude * s.freq.powi(k as i32) * (s.freq * t + s.phase + k as f64 * FRAC_PI_2).sin())
            .sum();
        if k == 0 {
            osc + self.offset
        } else {
            osc
        }
    }

    /// `sup_t |y^{(k)}(t)|` bounded by the triangle inequality.
    pub fn sup_bound(&self, k: usize) -> f64 {
        let osc: f64 = self.terms.iter().map(|s| s.amplitude.abs() * s.freq.abs().powi(k as i32)).sum();
        if k == 0 {
            osc + self.offset.abs()
        } else {
            osc
        }
    }
}

/// A smooth bounded reference signal with analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefSignal {
    pub channels: Vec<Channel>,
}

impl RefSignal {
    pub fn new(channels: Vec<Channel>) -> Self {
        Self { channels }
    }

    pub fn zero(m: usize) -> Self {
        Self { channels: vec![Channel::constant(0.0); m] }
    }

    pub fn m(&self) -> usize {
        self.channels.len()
    }

    /// Blocks `(y_ref, ẏ_ref, …, y_ref^{(levels)})`.
    /// Stacked `(y_ref, …, y_ref^{(levels)})` written into `out`.
    pub fn derivs_into(&self, t: f64, levels: usize, out: &mut Vec<f64>) {
        out.clear();
        for k in 0..=levels {
            out.extend(self.channels.iter().map(|c| c.deriv(t, k)));
        }
    }

    pub fn derivs(&self, t: f64, levels: usize) -> Vec<Vec<f64>> {
        (0..=levels).map(|k| self.channels.iter().map(|c| c.deriv(t, k)).collect()).collect()
    }

    pub fn sup_bound(&self, k: usize) -> f64 {
        self.channels.iter().map(|c| c.sup_bound(k).powi(2)).sum::<f64>().sqrt()
    }
}

/// Named reference signals: `cos`, `sin` (replicated over `m` channels),
/// `sin-sin2` (`(sin t, sin 2t)`, `m = 2`) and `zero`.
pub fn ref_preset(name: &str, m: usize) -> Result<RefSignal, SimError> {
    match name {
        "cos" => Ok(RefSignal::new(vec![Channel::cosine(1.0); m])),
        "sin" => Ok(RefSignal::new(vec![Channel::sine(1.0); m])),
        "zero" => Ok(RefSignal::zero(m)),
        "sin-sin2" if m == 2 => Ok(RefSignal::new(vec![Channel::sine(1.0), Channel::sine(2.0)])),
        "sin-sin2" => Err(SimError::Config(format!("preset sin-sin2 needs m = 2, got {m}"))),
        other => Err(SimError::UnknownPreset(other.to_string())),
    }
}
