//! A-priori error envelopes `‖e^{(k)}(t)‖ ≤ envelope_k / φ(t)` for the
//! funnel controller with `r̂ ≥ 2` and `φ(0) > 0`.

use thiserror::Error;

use crate::design::{AlphaFn, FunnelFn};
use crate::sim::Trajectory;
use crate::util::{norm, norm_sq, scaled};

const DAGGER_TOL: f64 = 1e-12;
const MU0_GRID: usize = 10_000;
/// Relative slack when comparing a trajectory against its envelopes.
pub const ENVELOPE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    /// Some `c_k` left the open unit interval.
    #[error("degenerate input: c_{k} = {c} is not below 1")]
    DegenerateInput { k: usize, c: f64 },
    #[error("trajectory does not match the bounds: {0}")]
    MismatchedScenario(String),
}

/// Inverse of `s ↦ s·α(s)` on `[0, 1)`.
pub fn alpha_dagger(alpha: &AlphaFn, y: f64) -> f64 {
    assert!(y >= 0.0, "alpha_dagger needs y >= 0, got {y}");
    if alpha.is_standard() {
        return y / (1.0 + y);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > DAGGER_TOL {
        let mid = 0.5 * (lo + hi);
        if mid * alpha.eval(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `s ↦ 2sα'(s) + α(s)`.
pub fn alpha_tilde(alpha: &AlphaFn, s: f64) -> f64 {
    2.0 * s * alpha.deriv(s) + alpha.eval(s)
}

/// `ess sup |φ'|/φ` on `[0, t_end]`: closed form where the family allows,
/// otherwise the maximum over a uniform grid of 10⁴ points.
pub fn mu0_estimate(phi: &FunnelFn, t_end: f64) -> f64 {
    phi.log_derivative_sup().unwrap_or_else(|| grid_mu0(phi, t_end))
}

fn grid_mu0(phi: &FunnelFn, t_end: f64) -> f64 {
    (0..MU0_GRID)
        .map(|i| t_end * i as f64 / (MU0_GRID - 1) as f64)
        .map(|t| phi.deriv(t).abs() / phi.eval(t))
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct BoundsInput {
    pub r_hat: usize,
    pub phi: FunnelFn,
    pub mu0: f64,
    pub alpha: AlphaFn,
    /// `e(0), …, e^{(r̂-1)}(0)`.
    pub e_init: Vec<Vec<f64>>,
}

impl BoundsInput {
    /// Input with `μ₀` filled in by [`mu0_estimate`].
    pub fn new(r_hat: usize, phi: FunnelFn, alpha: AlphaFn, e_init: Vec<Vec<f64>>, t_end: f64) -> Self {
        let mu0 = mu0_estimate(&phi, t_end);
        Self { r_hat, phi, mu0, alpha, e_init }
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        let bad = |msg: String| Err(BoundsError::Hypothesis(msg));
        if self.r_hat < 2 {
            return bad(format!("r_hat = {} but at least 2 is required", self.r_hat));
        }
        if !(self.phi.eval(0.0) > 0.0) {
            return bad("φ(0) must be positive".into());
        }
        if !(self.mu0 >= 0.0 && self.mu0.is_finite()) {
            return bad(format!("μ₀ = {} must be finite and non-negative", self.mu0));
        }
        if self.e_init.len() < self.r_hat - 1 {
            return bad(format!("need {} initial error derivatives, got {}", self.r_hat - 1, self.e_init.len()));
        }
        let m = self.e_init[0].len();
        if m == 0 || self.e_init.iter().any(|e| e.len() != m) {
            return bad("initial error blocks must share a positive size".into());
        }
        let derivs: Vec<f64> = (0..100).map(|i| self.alpha.deriv(0.99 * i as f64 / 99.0)).collect();
        if derivs.windows(2).any(|w| w[1] < w[0] - 1e-12 * w[0].abs().max(1.0)) {
            return bad(format!("α' of {} is not non-decreasing", self.alpha.name()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsResult {
    pub phi: FunnelFn,
    pub r_hat: usize,
    pub mu0: f64,
    /// `c_1, …, c_{r̂-1}`.
    pub c: Vec<f64>,
    pub mu: Vec<f64>,
    pub e0: Vec<Vec<f64>>,
    /// `envelopes[k]` bounds `φ(t)‖e^{(k)}(t)‖` for `k = 0, …, r̂-2`.
    pub envelopes: Vec<f64>,
}

impl BoundsResult {
    /// Bound on `‖e^{(k)}(t)‖`.
    pub fn envelope_at(&self, k: usize, t: f64) -> f64 {
        self.envelopes[k] / self.phi.eval(t)
    }
}

pub fn apriori_bounds(input: &BoundsInput) -> Result<BoundsResult, BoundsError> {
    input.validate()?;
    let alpha = &input.alpha;
    let mu0 = input.mu0;
    let phi0 = input.phi.eval(0.0);
    let n = input.r_hat - 1;
    let check = |k: usize, c: f64| {
        if c < 1.0 {
            Ok(c)
        } else {
            Err(BoundsError::DegenerateInput { k, c })
        }
    };

    let mut e0 = vec![scaled(&input.e_init[0], phi0)];
    let mut c = vec![check(1, norm_sq(&e0[0]).max(alpha_dagger(alpha, 1.0 + mu0)).sqrt())?];
    let mut mu = vec![1.0 + mu0 * c[0]];
    for k in 1..n {
        let (c_prev, mu_prev) = (c[k - 1], mu[k - 1]);
        let ca = c_prev * alpha.eval(c_prev * c_prev);
        mu.push(1.0 + mu0 * (1.0 + ca) + alpha_tilde(alpha, c_prev * c_prev) * (mu_prev + ca));
        let prev = &e0[k - 1];
        let gain = alpha.eval(norm_sq(prev));
        let ek: Vec<f64> = input.e_init[k].iter().zip(prev).map(|(e, p)| phi0 * e + gain * p).collect();
        c.push(check(k + 1, norm_sq(&ek).max(alpha_dagger(alpha, mu[k])).sqrt())?);
        e0.push(ek);
    }

    let mut envelopes = vec![c[0]];
    for k in 1..n {
        envelopes.push(c[k] + c[k - 1] * alpha.eval(c[k - 1] * c[k - 1]));
    }
    Ok(BoundsResult { phi: input.phi, r_hat: input.r_hat, mu0, c, mu, e0, envelopes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    pub k: usize,
    /// Largest `φ(t)‖e^{(k)}(t)‖ / envelope_k` over the samples.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Compares every sample of `traj` against the envelopes.
pub fn check_against_trajectory(bounds: &BoundsResult, traj: &Trajectory) -> Result<Vec<EnvelopeCheck>, BoundsError> {
    let meta = &traj.meta;
    if meta.phi.as_ref() != Some(&bounds.phi) {
        return Err(BoundsError::MismatchedScenario(format!("funnel {:?} vs {:?}", meta.phi, bounds.phi)));
    }
    if meta.r_hat != bounds.r_hat {
        return Err(BoundsError::MismatchedScenario(format!("r_hat {} vs {}", meta.r_hat, bounds.r_hat)));
    }
    Ok(bounds
        .envelopes
        .iter()
        .enumerate()
        .map(|(k, &env)| {
            let worst_ratio = (0..traj.len())
                .map(|i| bounds.phi.eval(traj.t[i]) * norm(traj.e_deriv(i, k)) / env)
                .fold(0.0, f64::max);
            EnvelopeCheck { k, worst_ratio, pass: worst_ratio <= 1.0 + ENVELOPE_SLACK }
        })
        .collect())
}
