use std::fmt;
use std::sync::Arc;

use super::SystemError;

type Branch = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Dead-zone input nonlinearity: zero on `(b_l, b_r)`, `D_l` left of the
/// band and `D_r` right of it.
#[derive(Clone)]
pub struct DeadZone {
    b_l: f64,
    b_r: f64,
    left: Branch,
    right: Branch,
}

impl fmt::Debug for DeadZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeadZone({}, {})", self.b_l, self.b_r)
    }
}

impl DeadZone {
    pub fn new(
        b_l: f64,
        b_r: f64,
        left: impl Fn(f64) -> f64 + Send + Sync + 'static,
        right: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, SystemError> {
        if !(b_l < 0.0 && 0.0 < b_r) {
            return Err(SystemError::Parameter(format!("need b_l < 0 < b_r, got ({b_l}, {b_r})")));
        }
        let tol = 1e-12;
        if left(b_l).abs() > tol || right(b_r).abs() > tol {
            return Err(SystemError::Parameter("dead-zone branches must vanish at the band edges".into()));
        }
        Ok(Self { b_l, b_r, left: Arc::new(left), right: Arc::new(right) })
    }

    /// Affine branches `v - b_r` and `v - b_l`.
    pub fn affine(b_l: f64, b_r: f64) -> Result<Self, SystemError> {
        Self::new(b_l, b_r, move |v| v - b_l, move |v| v - b_r)
    }

    /// The band `(-1, 1)` with unit slopes.
    pub fn unit() -> Self {
        Self::affine(-1.0, 1.0).expect("valid band")
    }

    pub fn band(&self) -> (f64, f64) {
        (self.b_l, self.b_r)
    }

    pub fn eval(&self, v: f64) -> f64 {
        if v >= self.b_r {
            (self.right)(v)
        } else if v <= self.b_l {
            (self.left)(v)
        } else {
            0.0
        }
    }
}
