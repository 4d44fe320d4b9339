//! Dormand–Prince 5(4) embedded pair.

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

/// Fifth-order weights (equal to the last row of `A`).
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];

/// Fourth-order embedded weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

pub struct Step {
    pub x: Vec<f64>,
    /// Derivative at the new point (first stage of the next step).
    pub dx: Vec<f64>,
    /// Scaled error norm; the step is acceptable when `<= 1`.
    pub err: f64,
}

/// Right-hand side of `ẋ = F(t, x)`.
pub type Rhs<'a, E> = dyn FnMut(f64, &[f64]) -> Result<Vec<f64>, E> + 'a;

/// One trial step from `(t, x)` with derivative `dx0`. Stage failures are
/// passed through unchanged.
pub fn dp45_step<E>(
    rhs: &mut Rhs<'_, E>,
    t: f64,
    x: &[f64],
    dx0: &[f64],
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Step, E> {
    let n = x.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(dx0.to_vec());
    let mut xs = vec![0.0; n];
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += A[s][j] * kj[i];
            }
            xs[i] = x[i] + h * acc;
        }
        k.push(rhs(t + C[s] * h, &xs)?);
    }
    // stage 6 was evaluated at x_{n+1} since A[6] = B5
    let x_new = xs;
    let mut err_sq = 0.0;
    for i in 0..n {
        let mut e = 0.0;
        for s in 0..7 {
            e += (B5[s] - B4[s]) * k[s][i];
        }
        let scale = abs_tol + rel_tol * x[i].abs().max(x_new[i].abs());
        err_sq += (h * e / scale).powi(2);
    }
    let err = if n == 0 { 0.0 } else { (err_sq / n as f64).sqrt() };
    let dx = k.pop().expect("seven stages");
    Ok(Step { x: x_new, dx, err })
}

/// Step size factor from the error estimate.
pub fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }
}
