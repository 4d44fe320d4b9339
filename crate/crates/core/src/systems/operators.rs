use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{History, Operator, SystemError};

/// The operator with empty output (`q = 0`).
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroOperator;

impl Operator for ZeroOperator {
    fn output_dim(&self) -> usize {
        0
    }

    fn evaluate(&self, _: f64, _: &[f64], _: &[f64], _: &dyn History) -> Result<Vec<f64>, SystemError> {
        Ok(Vec::new())
    }

    fn bibo_bound(&self, _c: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// Passes the current stack `(y, …, y^{(r-1)})` through unchanged.
#[derive(Debug, Clone, Copy)]
pub struct StackOperator {
    pub dim: usize,
}

impl Operator for StackOperator {
    fn output_dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, _: f64, zeta: &[f64], _: &[f64], _: &dyn History) -> Result<Vec<f64>, SystemError> {
        Ok(zeta.to_vec())
    }

    fn bibo_bound(&self, c: f64) -> Option<f64> {
        Some(c)
    }
}

type DelayMap = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// `T(ζ)(t) = Σ Ψ_i(t, ζ(t - h_i))` for point delays `h_i > 0`.
#[derive(Clone)]
pub struct PointDelay {
    maps: Vec<DelayMap>,
    delays: Vec<f64>,
    dim: usize,
}

impl PointDelay {
    pub fn new(maps: Vec<DelayMap>, delays: Vec<f64>, dim: usize) -> Result<Self, SystemError> {
        if maps.len() != delays.len() || maps.is_empty() {
            return Err(SystemError::Parameter(format!(
                "{} maps for {} delays",
                maps.len(),
                delays.len()
            )));
        }
        if delays.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(SystemError::Parameter("delays must be positive".into()));
        }
        Ok(Self { maps, delays, dim })
    }
}

impl Operator for PointDelay {
    fn output_dim(&self) -> usize {
        self.dim
    }

    fn memory(&self) -> f64 {
        self.delays.iter().cloned().fold(0.0, f64::max)
    }

    fn evaluate(&self, t: f64, _: &[f64], _: &[f64], history: &dyn History) -> Result<Vec<f64>, SystemError> {
        let mut out = vec![0.0; self.dim];
        for (psi, &h) in self.maps.iter().zip(&self.delays) {
            let past = history.at(t - h)?;
            for (o, v) in out.iter_mut().zip(psi(t, &past)) {
                *o += v;
            }
        }
        Ok(out)
    }
}

/// Internal dynamics of a linear plant in Byrnes–Isidori form:
/// `T(ζ) = Σ R_k ζ_k + S·η`, `η̇ = Qη + Pζ_1`, `η(0) = 0`.
#[derive(Debug, Clone)]
pub struct LinearInternal {
    pub r_blocks: Vec<DMatrix<f64>>,
    pub s: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl LinearInternal {
    fn m(&self) -> usize {
        self.s.nrows()
    }
}

impl Operator for LinearInternal {
    fn output_dim(&self) -> usize {
        self.m()
    }

    fn state_dim(&self) -> usize {
        self.q.nrows()
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0; self.q.nrows()]
    }

    fn evaluate(&self, _: f64, zeta: &[f64], state: &[f64], _: &dyn History) -> Result<Vec<f64>, SystemError> {
        let m = self.m();
        let mut out = &self.s * DVector::from_column_slice(state);
        for (k, rk) in self.r_blocks.iter().enumerate() {
            out += rk * DVector::from_column_slice(&zeta[k * m..(k + 1) * m]);
        }
        Ok(out.as_slice().to_vec())
    }

    fn state_derivative(&self, _: f64, zeta: &[f64], state: &[f64]) -> Vec<f64> {
        let m = self.m();
        let d = &self.q * DVector::from_column_slice(state)
            + &self.p * DVector::from_column_slice(&zeta[..m]);
        d.as_slice().to_vec()
    }

    /// `‖T(ζ)‖ ≤ (Σ‖R_k‖ + ‖S‖·∫‖e^{Qt}P‖dt)·c`, with the integral
    /// evaluated by the trapezoidal rule; `None` unless `Q` is Hurwitz.
    fn bibo_bound(&self, c: f64) -> Option<f64> {
        let direct: f64 = self.r_blocks.iter().map(|r| r.norm()).sum();
        if self.q.nrows() == 0 {
            return Some(direct * c);
        }
        let eig = crate::linear::eigenvalues(&self.q).ok()?;
        let decay = eig.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        if decay >= 0.0 {
            return None;
        }
        let horizon = 40.0 / -decay;
        let steps = 4000;
        let dt = horizon / steps as f64;
        let step = (&self.q * dt).exp();
        let mut e = DMatrix::identity(self.q.nrows(), self.q.nrows());
        let mut integral = 0.0;
        let mut prev = (&e * &self.p).norm();
        for _ in 0..steps {
            e = &step * e;
            let cur = (&e * &self.p).norm();
            integral += 0.5 * (prev + cur) * dt;
            prev = cur;
        }
        Some((direct + self.s.norm() * integral * 1.01) * c)
    }
}

/// The output `(y_1, y_2, η)` where `η̇ = -η²(a₄ y_1 + a₅ (1+y_1²)⁻¹ y_2 + η)`.
#[derive(Debug, Clone, Copy)]
pub struct IssInternal {
    pub alpha4: f64,
    pub alpha5: f64,
    pub eta0: f64,
}

impl IssInternal {
    pub fn g(&self, x1: f64, x2: f64, z: f64) -> f64 {
        -z * z * (self.alpha4 * x1 + self.alpha5 * x2 / (1.0 + x1 * x1) + z)
    }

    /// `|η(t)| ≤ max(|η⁰|, (|a₄| + |a₅|)·‖(y_1, y_2)‖∞)`: outside that
    /// level `η·g < 0`.
    pub fn eta_bound(&self, eta0: f64, input_sup: f64) -> f64 {
        eta0.abs().max((self.alpha4.abs() + self.alpha5.abs()) * input_sup)
    }
}

impl Operator for IssInternal {
    fn output_dim(&self) -> usize {
        3
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.eta0]
    }

    fn evaluate(&self, _: f64, zeta: &[f64], state: &[f64], _: &dyn History) -> Result<Vec<f64>, SystemError> {
        Ok(vec![zeta[0], zeta[1], state[0]])
    }

    fn state_derivative(&self, _: f64, zeta: &[f64], state: &[f64]) -> Vec<f64> {
        vec![self.g(zeta[0], zeta[1], state[0])]
    }

    fn bibo_bound(&self, c: f64) -> Option<f64> {
        let eta = self.eta_bound(self.eta0.abs().max(c), (2.0f64).sqrt() * c);
        Some((2.0 * c * c + eta * eta).sqrt())
    }
}
