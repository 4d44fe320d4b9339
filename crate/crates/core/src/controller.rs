//! The funnel controller `u = (N∘α)(‖w‖²)·w` with `w = ρ_r(φ(t)·𝐞(t))`,
//! and the derivative-based baseline controllers it is compared against.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::design::{AlphaFn, DesignParams, FunnelFn};
use crate::util::{norm, norm_sq, scaled};

/// Membership in the open unit ball is tested against `1 - BALL_MARGIN`.
pub const BALL_MARGIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("argument outside the open unit ball at recursion level {level} (norm {norm})")]
    Domain { level: usize, norm: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("funnel violation at t = {t} (recursion level {level})")]
    FunnelViolation { t: f64, level: usize },
}

#[inline]
fn in_ball(v: &[f64]) -> bool {
    norm_sq(v) < (1.0 - BALL_MARGIN) * (1.0 - BALL_MARGIN)
}

/// `γ(w) = α(‖w‖²)·w` on the open unit ball.
pub fn gamma(w: &[f64], alpha: &AlphaFn) -> Result<Vec<f64>, ControlError> {
    if !in_ball(w) {
        return Err(ControlError::Domain { level: 1, norm: norm(w) });
    }
    Ok(scaled(w, alpha.eval(norm_sq(w))))
}

/// Result of the recursion `ρ_1(η_1) = η_1`, `ρ_k = η_k + γ(ρ_{k-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rho {
    /// Value at the deepest level that could be evaluated.
    pub value: Vec<f64>,
    /// First level (1-based) whose value left the unit ball, if any.
    pub violation: Option<usize>,
}

impl Rho {
    pub fn in_domain(&self) -> bool {
        self.violation.is_none()
    }

    pub fn into_result(self) -> Result<Vec<f64>, ControlError> {
        match self.violation {
            None => Ok(self.value),
            Some(level) => Err(ControlError::Domain { level, norm: norm(&self.value) }),
        }
    }
}

/// Evaluates `ρ_k(η_1, …, η_k)` with `k = etas.len()`, reporting the first
/// level at which `(η_1, …, η_j) ∉ D_j`.
pub fn rho<E: AsRef<[f64]>>(etas: &[E], alpha: &AlphaFn) -> Rho {
    assert!(!etas.is_empty(), "rho needs at least one block");
    rho_blocks(etas.iter().map(|e| e.as_ref()), alpha)
}

fn rho_blocks<'a>(mut etas: impl Iterator<Item = &'a [f64]>, alpha: &AlphaFn) -> Rho {
    let mut value = etas.next().expect("at least one block").to_vec();
    if !in_ball(&value) {
        return Rho { value, violation: Some(1) };
    }
    for (j, eta) in etas.enumerate() {
        let gain = alpha.eval(norm_sq(&value));
        for (v, e) in value.iter_mut().zip(eta) {
            *v = e + gain * *v;
        }
        if !in_ball(&value) {
            return Rho { value, violation: Some(j + 2) };
        }
    }
    Rho { value, violation: None }
}

/// The stacked feedback vector `(e, ė, …, e^{(r̂-1)}, y^{(r̂)}, …, y^{(r-1)})`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoVector {
    entries: Vec<f64>,
    m: usize,
}

impl InfoVector {
    pub fn from_entries(entries: Vec<f64>, m: usize) -> Result<Self, ControlError> {
        if m == 0 || !entries.len().is_multiple_of(m) {
            return Err(ControlError::Shape(format!(
                "{} entries do not split into blocks of size {m}",
                entries.len()
            )));
        }
        Ok(Self { entries, m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.entries.len() / self.m
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn block(&self, k: usize) -> &[f64] {
        &self.entries[k * self.m..(k + 1) * self.m]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.m)
    }
}

pub fn build_info_vector<A: AsRef<[f64]>, B: AsRef<[f64]>>(
    y_derivs: &[A],
    yref_derivs: &[B],
    r: usize,
    r_hat: usize,
) -> Result<InfoVector, ControlError> {
    if y_derivs.len() != r {
        return Err(ControlError::Shape(format!(
            "expected {r} output derivative blocks, got {}",
            y_derivs.len()
        )));
    }
    if yref_derivs.len() != r_hat || r_hat == 0 || r_hat > r {
        return Err(ControlError::Shape(format!(
            "expected {r_hat} reference derivative blocks (r = {r}), got {}",
            yref_derivs.len()
        )));
    }
    let m = y_derivs[0].as_ref().len();
    let mut entries = Vec::with_capacity(r * m);
    for (k, y) in y_derivs.iter().enumerate() {
        let y = y.as_ref();
        if y.len() != m {
            return Err(ControlError::Shape(format!("block {k} has size {} != {m}", y.len())));
        }
        if k < r_hat {
            let yr = yref_derivs[k].as_ref();
            if yr.len() != m {
                return Err(ControlError::Shape(format!(
                    "reference block {k} has size {} != {m}",
                    yr.len()
                )));
            }
            entries.extend(y.iter().zip(yr).map(|(a, b)| a - b));
        } else {
            entries.extend_from_slice(y);
        }
    }
    InfoVector::from_entries(entries, m)
}

/// Output of a controller evaluation: the input `u` and the internal signal
/// `w` that must stay inside the open unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlAction {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

fn scaled_blocks(info: &InfoVector, factor: f64) -> Vec<Vec<f64>> {
    info.blocks().map(|b| scaled(b, factor)).collect()
}

/// The funnel controller at time `t`.
pub fn funnel_control(
    t: f64,
    info: &InfoVector,
    params: &DesignParams,
) -> Result<ControlAction, ControlError> {
    if info.r() != params.r() {
        return Err(ControlError::Shape(format!(
            "information vector has {} blocks, controller expects {}",
            info.r(),
            params.r()
        )));
    }
    let etas = scaled_blocks(info, params.phi.eval(t));
    let w = match rho(&etas, &params.alpha).into_result() {
        Ok(w) => w,
        Err(ControlError::Domain { level, .. }) => {
            return Err(ControlError::FunnelViolation { t, level })
        }
        Err(e) => return Err(e),
    };
    let gain = params.n.eval(params.alpha.eval(norm_sq(&w)));
    Ok(ControlAction { u: scaled(&w, gain), w })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCheck {
    Accepted,
    Rejected { level: usize },
}

/// Tests `φ(0)·𝐞(0) ∈ D_r`.
pub fn check_initial_condition(params: &DesignParams, info0: &InfoVector) -> InitialCheck {
    let etas = scaled_blocks(info0, params.phi.eval(0.0));
    match rho(&etas, &params.alpha).violation {
        None => InitialCheck::Accepted,
        Some(level) => InitialCheck::Rejected { level },
    }
}

fn alpha_checked(alpha: &AlphaFn, s: f64, level: usize) -> Result<f64, ControlError> {
    if s < (1.0 - BALL_MARGIN) * (1.0 - BALL_MARGIN) {
        Ok(alpha.eval(s))
    } else {
        Err(ControlError::Domain { level, norm: s.sqrt() })
    }
}

/// Baseline controller for relative degree two (scalar and multi-input):
/// `w₁ = ė + α(φ²‖e‖²)e`, `u = -α(φ₁²‖w₁‖²)w₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineR2Output {
    pub u: Vec<f64>,
    pub w1: Vec<f64>,
}

pub fn baseline_control_r2(
    e: &[f64],
    e_dot: &[f64],
    phi: f64,
    phi1: f64,
    alpha: &AlphaFn,
) -> Result<BaselineR2Output, ControlError> {
    let a0 = alpha_checked(alpha, phi * phi * norm_sq(e), 1)?;
    let w1: Vec<f64> = e_dot.iter().zip(e).map(|(d, x)| d + a0 * x).collect();
    let a1 = alpha_checked(alpha, phi1 * phi1 * norm_sq(&w1), 2)?;
    Ok(BaselineR2Output { u: scaled(&w1, -a1), w1 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineR3Output {
    pub u: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

/// Baseline controller for relative degree three. `ẇ₁` is expanded
/// analytically; for `α(s) = 1/(1-s)` the factor `α'` equals `α²`.
#[allow(clippy::too_many_arguments)]
pub fn baseline_control_r3(
    e: &[f64],
    e_dot: &[f64],
    e_ddot: &[f64],
    phi: f64,
    phi1: f64,
    phi2: f64,
    phi_dot: f64,
    alpha: &AlphaFn,
) -> Result<BaselineR3Output, ControlError> {
    let s0 = phi * phi * norm_sq(e);
    let a0 = alpha_checked(alpha, s0, 1)?;
    let da0 = alpha.deriv(s0);
    let w1: Vec<f64> = e_dot.iter().zip(e).map(|(d, x)| d + a0 * x).collect();
    let a1 = alpha_checked(alpha, phi1 * phi1 * norm_sq(&w1), 2)?;
    let e_dot_e: f64 = e.iter().zip(e_dot).map(|(a, b)| a * b).sum();
    let ds0 = 2.0 * (phi_dot * phi * norm_sq(e) + phi * phi * e_dot_e);
    let w2: Vec<f64> = (0..e.len())
        .map(|i| e_ddot[i] + da0 * ds0 * e[i] + a0 * e_dot[i] + a1 * w1[i])
        .collect();
    let a2 = alpha_checked(alpha, phi2 * phi2 * norm_sq(&w2), 3)?;
    Ok(BaselineR3Output { u: scaled(&w2, -a2), w1, w2 })
}

/// A feedback law usable by the closed-loop simulator.
#[derive(Clone)]
pub enum Controller {
    Funnel(DesignParams),
    /// Relative-degree-two baseline; the multi-input form uses the same law.
    BaselineR2 { phi: FunnelFn, phi1: FunnelFn, alpha: AlphaFn },
    BaselineR3 { phi: FunnelFn, phi1: FunnelFn, phi2: FunnelFn, alpha: AlphaFn },
    /// Prescribed input signal; no funnel constraint.
    OpenLoop(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
}

impl fmt::Debug for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Controller::Funnel(p) => f.debug_tuple("Funnel").field(p).finish(),
            Controller::BaselineR2 { phi, phi1, alpha } => f
                .debug_struct("BaselineR2")
                .field("phi", phi)
                .field("phi1", phi1)
                .field("alpha", alpha)
                .finish(),
            Controller::BaselineR3 { phi, phi1, phi2, alpha } => f
                .debug_struct("BaselineR3")
                .field("phi", phi)
                .field("phi1", phi1)
                .field("phi2", phi2)
                .field("alpha", alpha)
                .finish(),
            Controller::OpenLoop(_) => f.write_str("OpenLoop"),
        }
    }
}

impl Controller {
    pub fn label(&self) -> &'static str {
        match self {
            Controller::Funnel(_) => "funnel",
            Controller::BaselineR2 { .. } => "baseline-r2",
            Controller::BaselineR3 { .. } => "baseline-r3",
            Controller::OpenLoop(_) => "open-loop",
        }
    }

    /// The funnel function defining the performance funnel for `e`.
    pub fn funnel(&self) -> Option<&FunnelFn> {
        match self {
            Controller::Funnel(p) => Some(&p.phi),
            Controller::BaselineR2 { phi, .. } | Controller::BaselineR3 { phi, .. } => Some(phi),
            Controller::OpenLoop(_) => None,
        }
    }

    /// Number of reference derivatives the law consumes.
    pub fn r_hat(&self, r: usize) -> usize {
        match self {
            Controller::Funnel(p) => p.r_hat(),
            _ => r,
        }
    }

    /// Relative degree the law is designed for, if fixed.
    pub fn required_r(&self) -> Option<usize> {
        match self {
            Controller::Funnel(p) => Some(p.r()),
            Controller::BaselineR2 { .. } => Some(2),
            Controller::BaselineR3 { .. } => Some(3),
            Controller::OpenLoop(_) => None,
        }
    }

    /// Evaluates the law. `y_derivs` holds `r` blocks of size `m`;
    /// `yref_derivs` holds at least `r` blocks.
    pub fn evaluate(
        &self,
        t: f64,
        y_derivs: &[&[f64]],
        yref_derivs: &[Vec<f64>],
    ) -> Result<ControlAction, ControlError> {
        let r = y_derivs.len();
        if yref_derivs.len() < r {
            return Err(ControlError::Shape(format!(
                "need {r} reference derivative blocks, got {}",
                yref_derivs.len()
            )));
        }
        let m = y_derivs.first().map_or(0, |b| b.len());
        if y_derivs.iter().any(|b| b.len() != m) || yref_derivs[..r].iter().any(|b| b.len() != m) {
            return Err(ControlError::Shape("blocks of unequal size".into()));
        }
        let zeta: Vec<f64> = y_derivs.concat();
        let yref: Vec<f64> = yref_derivs[..r].concat();
        self.evaluate_flat(t, &zeta, &yref, m)
    }

    /// Same as [`Controller::evaluate`] on stacked vectors: `zeta` and
    /// `yref` both hold `r` blocks of size `m`.
    pub fn evaluate_flat(
        &self,
        t: f64,
        zeta: &[f64],
        yref: &[f64],
        m: usize,
    ) -> Result<ControlAction, ControlError> {
        let r = zeta.len() / m;
        let err = |k: usize| -> Vec<f64> {
            (k * m..(k + 1) * m).map(|i| zeta[i] - yref[i]).collect()
        };
        match self {
            Controller::Funnel(p) => {
                if r != p.r() {
                    return Err(ControlError::Shape(format!(
                        "information vector has {r} blocks, controller expects {}",
                        p.r()
                    )));
                }
                let phi = p.phi.eval(t);
                let split = p.r_hat() * m;
                let etas: Vec<f64> = zeta
                    .iter()
                    .enumerate()
                    .map(|(i, z)| if i < split { phi * (z - yref[i]) } else { phi * z })
                    .collect();
                let rho = rho_blocks(etas.chunks(m), &p.alpha);
                if let Some(level) = rho.violation {
                    return Err(ControlError::FunnelViolation { t, level });
                }
                let w = rho.value;
                let gain = p.n.eval(p.alpha.eval(norm_sq(&w)));
                Ok(ControlAction { u: scaled(&w, gain), w })
            }
            Controller::BaselineR2 { phi, phi1, alpha } => {
                let (p, p1) = (phi.eval(t), phi1.eval(t));
                let out = baseline_control_r2(&err(0), &err(1), p, p1, alpha)
                    .map_err(|e| violation(t, e))?;
                Ok(ControlAction { w: scaled(&out.w1, p1), u: out.u })
            }
            Controller::BaselineR3 { phi, phi1, phi2, alpha } => {
                let out = baseline_control_r3(
                    &err(0),
                    &err(1),
                    &err(2),
                    phi.eval(t),
                    phi1.eval(t),
                    phi2.eval(t),
                    phi.deriv(t),
                    alpha,
                )
                .map_err(|e| violation(t, e))?;
                Ok(ControlAction { w: scaled(&out.w2, phi2.eval(t)), u: out.u })
            }
            Controller::OpenLoop(input) => {
                let u = input(t);
                let w = vec![0.0; u.len()];
                Ok(ControlAction { u, w })
            }
        }
    }
}

fn violation(t: f64, e: ControlError) -> ControlError {
    match e {
        ControlError::Domain { level, .. } => ControlError::FunnelViolation { t, level },
        other => other,
    }
}
