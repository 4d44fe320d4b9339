//! Funnel control design parameters: the funnel function `φ`, the switching
//! function `N` and the gain shaping function `α`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("funnel function must be bounded when r_hat < r (r_hat = {r_hat}, r = {r})")]
    UnboundedFunnel { r: usize, r_hat: usize },
    #[error("r_hat must lie in 1..=r (r_hat = {r_hat}, r = {r})")]
    InvalidRHat { r: usize, r_hat: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Gain shaping function `α: [0,1) → [1,∞)`, a C¹ bijection.
#[derive(Clone)]
pub enum AlphaFn {
    /// `α(s) = 1/(1-s)`.
    Standard,
    /// `α(s) = (1-s)^(-k)` for `k ≥ 1`.
    Power(f64),
    Custom {
        name: String,
        eval: ScalarFn,
        deriv: ScalarFn,
    },
}

impl AlphaFn {
    pub fn standard() -> Self {
        AlphaFn::Standard
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        AlphaFn::Custom {
            name: name.into(),
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
        }
    }

    pub fn name(&self) -> String {
        match self {
            AlphaFn::Standard => "standard".into(),
            AlphaFn::Power(k) => format!("power({k})"),
            AlphaFn::Custom { name, .. } => name.clone(),
        }
    }

    /// Evaluates `α(s)`. Callers guarantee `s ∈ [0,1)`.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            AlphaFn::Standard => 1.0 / (1.0 - s),
            AlphaFn::Power(k) => (1.0 - s).powf(-k),
            AlphaFn::Custom { eval, .. } => eval(s),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match self {
            AlphaFn::Standard => {
                let a = 1.0 / (1.0 - s);
                a * a
            }
            AlphaFn::Power(k) => k * (1.0 - s).powf(-k - 1.0),
            AlphaFn::Custom { deriv, .. } => deriv(s),
        }
    }

    pub fn is_standard(&self) -> bool {
        matches!(self, AlphaFn::Standard)
    }
}

impl fmt::Debug for AlphaFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlphaFn({})", self.name())
    }
}

/// Switching function `N: ℝ≥0 → ℝ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchingFn {
    /// `N(s) = s·sin(s)`: a continuous surjection without the Nussbaum property.
    SurjectiveProbe,
    /// `N(s) = s²·cos(s)`: a classical Nussbaum function.
    Nussbaum,
    Identity,
    NegatedIdentity,
    /// `N(s) = σ·s`.
    Scaled(f64),
}

impl SwitchingFn {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            SwitchingFn::SurjectiveProbe => s * s.sin(),
            SwitchingFn::Nussbaum => s * s * s.cos(),
            SwitchingFn::Identity => s,
            SwitchingFn::NegatedIdentity => -s,
            SwitchingFn::Scaled(sigma) => sigma * s,
        }
    }

    /// True for the functions that attain both signs unboundedly.
    pub fn is_surjective(&self) -> bool {
        matches!(self, SwitchingFn::SurjectiveProbe | SwitchingFn::Nussbaum)
    }
}

/// Funnel function `φ ∈ Φ`; the funnel radius at time `t` is `1/φ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunnelFn {
    /// `φ(t) = 1/(c0·e^{-λt} + c1)`.
    RecipExp { c0: f64, c1: f64, lambda: f64 },
    /// `φ(t) = a·t^ℓ`.
    Poly { a: f64, exponent: u32 },
    /// `φ(t) = e^{at} - 1`.
    Exp { a: f64 },
    /// `φ(t) = min(e^{at} - 1, b)`.
    CappedExp { a: f64, b: f64 },
    /// `φ(t) = a + b·t`.
    Affine { a: f64, b: f64 },
}

impl FunnelFn {
    pub fn validate(&self) -> Result<(), DesignError> {
        let ok = match *self {
            FunnelFn::RecipExp { c0, c1, lambda } => c0 >= 0.0 && c1 > 0.0 && lambda >= 0.0,
            FunnelFn::Poly { a, exponent } => a > 0.0 && exponent >= 1,
            FunnelFn::Exp { a } => a > 0.0,
            FunnelFn::CappedExp { a, b } => a > 0.0 && b > 0.0,
            FunnelFn::Affine { a, b } => a > 0.0 && b >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(DesignError::Parameter(format!("invalid funnel function {self:?}")))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            FunnelFn::RecipExp { c0, c1, lambda } => 1.0 / (c0 * (-lambda * t).exp() + c1),
            FunnelFn::Poly { a, exponent } => a * t.powi(exponent as i32),
            FunnelFn::Exp { a } => (a * t).exp_m1(),
            FunnelFn::CappedExp { a, b } => (a * t).exp_m1().min(b),
            FunnelFn::Affine { a, b } => a + b * t,
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match *self {
            FunnelFn::RecipExp { c0, c1, lambda } => {
                let den = c0 * (-lambda * t).exp() + c1;
                lambda * c0 * (-lambda * t).exp() / (den * den)
            }
            FunnelFn::Poly { a, exponent } => {
                a * f64::from(exponent) * t.powi(exponent as i32 - 1)
            }
            FunnelFn::Exp { a } => a * (a * t).exp(),
            FunnelFn::CappedExp { a, b } => {
                if (a * t).exp_m1() < b {
                    a * (a * t).exp()
                } else {
                    0.0
                }
            }
            FunnelFn::Affine { b, .. } => b,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match *self {
            FunnelFn::RecipExp { .. } | FunnelFn::CappedExp { .. } => true,
            FunnelFn::Affine { b, .. } => b == 0.0,
            FunnelFn::Poly { .. } | FunnelFn::Exp { .. } => false,
        }
    }

    /// A constant `c` with `|φ'(t)| ≤ c(1 + φ(t))` for all `t ≥ 0`.
    pub fn growth_constant(&self) -> f64 {
        match *self {
            FunnelFn::RecipExp { lambda, .. } => lambda,
            FunnelFn::Poly { a, exponent } => {
                let l = f64::from(exponent);
                (a * l).max(l)
            }
            FunnelFn::Exp { a } | FunnelFn::CappedExp { a, .. } => a,
            FunnelFn::Affine { b, .. } => b,
        }
    }

    /// `ess sup |φ'|/φ` on `ℝ≥0` in closed form, when finite.
    pub fn log_derivative_sup(&self) -> Option<f64> {
        match *self {
            FunnelFn::RecipExp { c0, c1, lambda } => Some(lambda * c0 / (c0 + c1)),
            FunnelFn::Affine { a, b } => Some(b / a),
            // φ(0) = 0 for the remaining families
            _ => None,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            FunnelFn::RecipExp { .. } => "recip-exp",
            FunnelFn::Poly { .. } => "poly",
            FunnelFn::Exp { .. } => "exp",
            FunnelFn::CappedExp { .. } => "capped-exp",
            FunnelFn::Affine { .. } => "affine",
        }
    }
}

/// The triple `(φ, N, α)` together with the relative degree `r` and the
/// number `r_hat` of reference derivatives available for feedback.
#[derive(Debug, Clone)]
pub struct DesignParams {
    pub phi: FunnelFn,
    pub n: SwitchingFn,
    pub alpha: AlphaFn,
    r: usize,
    r_hat: usize,
}

impl DesignParams {
    pub fn new(
        phi: FunnelFn,
        n: SwitchingFn,
        alpha: AlphaFn,
        r: usize,
        r_hat: usize,
    ) -> Result<Self, DesignError> {
        if r == 0 || r_hat == 0 || r_hat > r {
            return Err(DesignError::InvalidRHat { r, r_hat });
        }
        phi.validate()?;
        if r_hat < r && !phi.is_bounded() {
            return Err(DesignError::UnboundedFunnel { r, r_hat });
        }
        Ok(Self { phi, n, alpha, r, r_hat })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn r_hat(&self) -> usize {
        self.r_hat
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn standard_alpha_shape() {
        let a = AlphaFn::standard();
        assert_eq!(a.eval(0.0), 1.0);
        let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        assert!(grid.windows(2).all(|w| a.eval(w[1]) > a.eval(w[0])));
        assert!(a.eval(1.0 - 1e-6) > 1e3);
    }

    #[test]
    fn alpha_derivatives_match_finite_differences() {
        for a in [AlphaFn::Standard, AlphaFn::Power(2.0)] {
            for i in 1..99 {
                let s = i as f64 / 100.0;
                let fd = central_diff(|x| a.eval(x), s, 1e-6);
                let d = a.deriv(s);
                assert!(((fd - d) / d).abs() < 1e-6, "{a:?} s={s}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn surjective_probe_takes_both_signs() {
        for s_max in [10.0, 100.0, 1000.0] {
            let n = 20_000;
            let vals: Vec<f64> = (0..=n)
                .map(|i| SwitchingFn::SurjectiveProbe.eval(s_max * i as f64 / n as f64))
                .collect();
            let max = vals.iter().cloned().fold(f64::MIN, f64::max);
            let min = vals.iter().cloned().fold(f64::MAX, f64::min);
            let bound = 0.5 * s_max;
            assert!(max > bound && min < -bound);
        }
    }

    fn families() -> Vec<FunnelFn> {
        vec![
            FunnelFn::RecipExp { c0: 5.0, c1: 0.1, lambda: 2.0 },
            FunnelFn::Poly { a: 1.0, exponent: 2 },
            FunnelFn::Exp { a: 0.5 },
            FunnelFn::CappedExp { a: 1.0, b: 50.0 },
            FunnelFn::Affine { a: 1.0, b: 1.0 },
        ]
    }

    #[test]
    fn funnel_families_are_in_phi() {
        for phi in families() {
            let grid: Vec<f64> = (1..=2000).map(|i| i as f64 * 0.05).collect();
            assert!(grid.iter().all(|&t| phi.eval(t) > 0.0), "{phi:?}");
            let inf = grid
                .iter()
                .filter(|&&t| t >= 1.0)
                .map(|&t| phi.eval(t))
                .fold(f64::MAX, f64::min);
            assert!(inf > 0.0);
            let c = phi.growth_constant();
            for &t in &grid {
                assert!(phi.deriv(t).abs() <= c * (1.0 + phi.eval(t)) * (1.0 + 1e-12), "{phi:?} t={t}");
            }
        }
    }

    #[test]
    fn funnel_derivatives_match_finite_differences() {
        for phi in families() {
            for i in 1..200 {
                let t = i as f64 * 0.037 + 0.01;
                if let FunnelFn::CappedExp { a, b } = phi {
                    if ((b + 1.0).ln() / a - t).abs() < 1e-3 {
                        continue;
                    }
                }
                let fd = central_diff(|x| phi.eval(x), t, 1e-6);
                let d = phi.deriv(t);
                assert!((fd - d).abs() <= 1e-5 * (1.0 + d.abs()), "{phi:?} t={t}");
            }
        }
    }

    #[test]
    fn log_derivative_sup_matches_grid() {
        for phi in [
            FunnelFn::RecipExp { c0: 5.0, c1: 0.1, lambda: 2.0 },
            FunnelFn::Affine { a: 2.0, b: 3.0 },
        ] {
            let grid_max = (0..10_000)
                .map(|i| i as f64 * 1e-3)
                .map(|t| phi.deriv(t).abs() / phi.eval(t))
                .fold(0.0, f64::max);
            let closed = phi.log_derivative_sup().unwrap();
            assert!((grid_max - closed).abs() < 1e-9);
        }
    }

    #[test]
    fn unbounded_funnel_rejected_when_r_hat_below_r() {
        let err = DesignParams::new(
            FunnelFn::Poly { a: 1.0, exponent: 2 },
            SwitchingFn::SurjectiveProbe,
            AlphaFn::standard(),
            2,
            1,
        )
        .unwrap_err();
        assert_eq!(err, DesignError::UnboundedFunnel { r: 2, r_hat: 1 });
        assert!(DesignParams::new(
            FunnelFn::RecipExp { c0: 2.0, c1: 0.01, lambda: 1.0 },
            SwitchingFn::SurjectiveProbe,
            AlphaFn::standard(),
            2,
            1,
        )
        .is_ok());
        assert!(matches!(
            DesignParams::new(
                FunnelFn::Affine { a: 1.0, b: 0.0 },
                SwitchingFn::Identity,
                AlphaFn::standard(),
                2,
                3
            ),
            Err(DesignError::InvalidRHat { .. })
        ));
    }
}
