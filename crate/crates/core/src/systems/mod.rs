//! Systems of the form `y^{(r)}(t) = f(d(t), T(y, …, y^{(r-1)})(t), u(t))`
//! with a causal operator `T`, plus the concrete plants used in the
//! shipped scenarios.

mod deadzone;
mod operators;
mod plants;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::linear::LinearError;

pub use deadzone::DeadZone;
pub use operators::{LinearInternal, IssInternal, PointDelay, StackOperator, ZeroOperator};
pub use plants::{
    delay_example_system, dead_zone_example_system, integrator_chain, linear_to_functional,
    mass_on_car, mass_on_car_state_space, probe_example_system, probe_f, robot_manipulator,
    DeadZoneExample, RobotArm,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("inertia matrix numerically singular (condition {cond:e})")]
    SingularMass { cond: f64 },
    #[error("history lookup at t = {t} precedes the available history starting at {start}")]
    HistoryUnderflow { t: f64, start: f64 },
    #[error("operator read the output at t = {t} beyond the current time {now}")]
    Lookahead { t: f64, now: f64 },
    #[error(transparent)]
    Linear(#[from] LinearError),
}

/// Read access to the stacked output `(y, ẏ, …, y^{(r-1)})` on `[-h, now]`.
pub trait History {
    fn now(&self) -> f64;
    /// Earliest time with data, normally `-h`.
    fn start(&self) -> f64;
    /// Unchecked lookup; implementors may assume `start <= t <= now`.
    fn sample(&self, t: f64) -> Vec<f64>;

    /// Checked lookup that refuses to look into the future.
    fn at(&self, t: f64) -> Result<Vec<f64>, SystemError> {
        let now = self.now();
        let slack = 1e-12 * now.abs().max(1.0);
        if t > now + slack {
            return Err(SystemError::Lookahead { t, now });
        }
        if t < self.start() - slack {
            return Err(SystemError::HistoryUnderflow { t, start: self.start() });
        }
        Ok(self.sample(t.clamp(self.start(), now)))
    }
}

/// History given by a closure; handy for operator tests.
pub struct FnHistory<F: Fn(f64) -> Vec<f64>> {
    pub now: f64,
    pub start: f64,
    pub f: F,
}

impl<F: Fn(f64) -> Vec<f64>> History for FnHistory<F> {
    fn now(&self) -> f64 {
        self.now
    }

    fn start(&self) -> f64 {
        self.start
    }

    fn sample(&self, t: f64) -> Vec<f64> {
        (self.f)(t)
    }
}

/// A causal operator with memory `h`.
///
/// Operators with internal dynamics expose a state whose derivative is
/// integrated alongside the plant; the integrator keeps the tentative state
/// of a trial step separate and commits it only once the step is accepted.
pub trait Operator: Send + Sync {
    fn output_dim(&self) -> usize;

    fn memory(&self) -> f64 {
        0.0
    }

    fn state_dim(&self) -> usize {
        0
    }

    fn initial_state(&self) -> Vec<f64> {
        Vec::new()
    }

    /// `T(ζ)(t)` given the current stack `zeta`, the internal state and the
    /// output history.
    fn evaluate(
        &self,
        t: f64,
        zeta: &[f64],
        state: &[f64],
        history: &dyn History,
    ) -> Result<Vec<f64>, SystemError>;

    fn state_derivative(&self, _t: f64, _zeta: &[f64], _state: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    /// A bound on `‖T(ζ)‖∞` valid whenever `‖ζ‖∞` and the initial internal
    /// state are bounded by `c`, if one is known.
    fn bibo_bound(&self, _c: f64) -> Option<f64> {
        None
    }
}

pub type SignalFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;
pub type NonlinearityFn = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// A member `(d, f, T)` of the system class together with its initial
/// output history.
#[derive(Clone)]
pub struct FunctionalSystem {
    label: String,
    m: usize,
    r: usize,
    p: usize,
    disturbance: SignalFn,
    f: NonlinearityFn,
    operator: Arc<dyn Operator>,
    history0: SignalFn,
}

impl fmt::Debug for FunctionalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalSystem")
            .field("label", &self.label)
            .field("m", &self.m)
            .field("r", &self.r)
            .field("p", &self.p)
            .field("q", &self.q())
            .field("h", &self.memory())
            .finish()
    }
}

impl FunctionalSystem {
    /// `history0(t)` returns the stacked initial data for `t ∈ [-h, 0]`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        label: impl Into<String>,
        m: usize,
        r: usize,
        p: usize,
        disturbance: SignalFn,
        f: NonlinearityFn,
        operator: Arc<dyn Operator>,
        history0: SignalFn,
    ) -> Result<Self, SystemError> {
        if m == 0 || r == 0 {
            return Err(SystemError::Shape(format!("need m, r >= 1 (m = {m}, r = {r})")));
        }
        let sys = Self { label: label.into(), m, r, p, disturbance, f, operator, history0 };
        let h0 = (sys.history0)(0.0);
        if h0.len() != r * m {
            return Err(SystemError::Shape(format!(
                "initial history has {} entries, expected {}",
                h0.len(),
                r * m
            )));
        }
        let d0 = (sys.disturbance)(0.0);
        if d0.len() != p {
            return Err(SystemError::Shape(format!("disturbance has {} entries, expected {p}", d0.len())));
        }
        let z = vec![0.0; sys.q()];
        let fx = (sys.f)(&d0, &z, &vec![0.0; m]);
        if fx.len() != m || fx.iter().any(|x| !x.is_finite()) {
            return Err(SystemError::Shape("f must return m finite values".into()));
        }
        Ok(sys)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.operator.output_dim()
    }

    pub fn memory(&self) -> f64 {
        self.operator.memory()
    }

    pub fn operator(&self) -> &dyn Operator {
        self.operator.as_ref()
    }

    pub fn disturbance(&self, t: f64) -> Vec<f64> {
        (self.disturbance)(t)
    }

    pub fn eval_f(&self, d: &[f64], z: &[f64], u: &[f64]) -> Vec<f64> {
        (self.f)(d, z, u)
    }

    pub fn nonlinearity(&self) -> NonlinearityFn {
        Arc::clone(&self.f)
    }

    /// Stacked initial data at `t ∈ [-h, 0]`.
    pub fn initial_history(&self, t: f64) -> Vec<f64> {
        (self.history0)(t)
    }

    /// `y^{(r)}(t)` for the given stack, operator state and input.
    pub fn highest_derivative(
        &self,
        t: f64,
        zeta: &[f64],
        op_state: &[f64],
        history: &dyn History,
        u: &[f64],
    ) -> Result<Vec<f64>, SystemError> {
        let z = self.operator.evaluate(t, zeta, op_state, history)?;
        Ok((self.f)(&(self.disturbance)(t), &z, u))
    }
}
