use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use super::{
    DeadZone, FunctionalSystem, IssInternal, LinearInternal, Operator, PointDelay, StackOperator,
    SystemError, ZeroOperator,
};
use crate::linear::{byrnes_isidori, relative_degree, LinearError, StateSpace};

fn no_disturbance() -> super::SignalFn {
    Arc::new(|_| Vec::new())
}

fn constant_history(stack: Vec<f64>) -> super::SignalFn {
    Arc::new(move |_| stack.clone())
}

fn positive(name: &str, v: f64) -> Result<(), SystemError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SystemError::Parameter(format!("{name} must be positive, got {v}")))
    }
}

/// Mass-spring system on a car, state `(z, ż, s, ṡ)`, output `z + s·cosθ`.
pub fn mass_on_car_state_space(
    m1: f64,
    m2: f64,
    k: f64,
    d: f64,
    theta: f64,
) -> Result<StateSpace, SystemError> {
    positive("m1", m1)?;
    positive("m2", m2)?;
    positive("k", k)?;
    positive("d", d)?;
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(SystemError::Parameter(format!("theta must lie in [0, pi/2), got {theta}")));
    }
    let (sin, cos) = theta.sin_cos();
    let mu = m2 * (m1 + m2 * sin * sin);
    let mu1 = m1 / mu;
    let mu2 = m2 / mu;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, mu2 * k * cos, mu2 * d * cos,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, -(mu1 + mu2) * k, -(mu1 + mu2) * d,
    ]);
    let b = DMatrix::from_column_slice(4, 1, &[0.0, mu2, 0.0, -mu2 * cos]);
    let c = DMatrix::from_row_slice(1, 4, &[1.0, 0.0, cos, 0.0]);
    Ok(StateSpace::new(a, b, c)?)
}

/// The mass-on-car plant as a linear state space and in functional form.
pub fn mass_on_car(
    m1: f64,
    m2: f64,
    k: f64,
    d: f64,
    theta: f64,
    x0: &[f64],
) -> Result<(StateSpace, FunctionalSystem), SystemError> {
    let ss = mass_on_car_state_space(m1, m2, k, d, theta)?;
    let mut sys = linear_to_functional(&ss, x0)?;
    sys.label = format!("mass-on-car(theta={:.1}deg)", theta.to_degrees());
    Ok((ss, sys))
}

/// Functional form of a linear plant with strict relative degree: the
/// internal state is driven by `y` with zero initial value, and its free
/// response `S·e^{Qt}η⁰` enters as the disturbance.
pub fn linear_to_functional(ss: &StateSpace, x0: &[f64]) -> Result<FunctionalSystem, SystemError> {
    let n = ss.n();
    let m = ss.m();
    if x0.len() != n {
        return Err(SystemError::Shape(format!("x0 has {} entries, expected {n}", x0.len())));
    }
    let (r, _) = relative_degree(ss).ok_or(LinearError::NoRelativeDegree)?;
    let bi = byrnes_isidori(ss, r)?;
    let x0v = DVector::from_column_slice(x0);
    let transformed = &bi.u * &x0v;
    let eta0 = transformed.rows(r * m, n - r * m).into_owned();

    let mut stack = Vec::with_capacity(r * m);
    let mut ca = ss.c.clone();
    for _ in 0..r {
        stack.extend((&ca * &x0v).iter());
        ca = &ca * &ss.a;
    }

    let s = bi.s.clone();
    let q = bi.q.clone();
    let disturbance: super::SignalFn = if q.nrows() == 0 {
        Arc::new(move |_| vec![0.0; m])
    } else {
        Arc::new(move |t| (&s * (&q * t).exp() * &eta0).as_slice().to_vec())
    };
    let gamma = bi.gamma.clone();
    let f: super::NonlinearityFn = Arc::new(move |d, z, u| {
        let gu = &gamma * DVector::from_column_slice(u);
        (0..gu.len()).map(|i| d[i] + z[i] + gu[i]).collect()
    });
    let op = LinearInternal { r_blocks: bi.r_blocks.clone(), s: bi.s.clone(), p: bi.p.clone(), q: bi.q.clone() };
    FunctionalSystem::new(
        format!("linear(n={n}, m={m}, r={r})"),
        m,
        r,
        m,
        disturbance,
        f,
        Arc::new(op),
        constant_history(stack),
    )
}

/// Planar two-link arm with point masses at the link ends.
#[derive(Debug, Clone, Copy)]
pub struct RobotArm {
    pub m1: f64,
    pub m2: f64,
    pub l1: f64,
    pub l2: f64,
    pub g: f64,
}

impl RobotArm {
    pub fn mass(&self, y: [f64; 2]) -> Matrix2<f64> {
        let Self { m1, m2, l1, l2, .. } = *self;
        let c2 = y[1].cos();
        let off = m2 * (l2 * l2 + l1 * l2 * c2);
        Matrix2::new(
            m1 * l1 * l1 + m2 * (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * c2),
            off,
            off,
            m2 * l2 * l2,
        )
    }

    pub fn coriolis(&self, y: [f64; 2], v: [f64; 2]) -> Matrix2<f64> {
        let h = self.m2 * self.l1 * self.l2 * y[1].sin();
        Matrix2::new(-2.0 * h * v[0], -h * v[1], -h * v[0], 0.0)
    }

    pub fn gravity(&self, y: [f64; 2]) -> Vector2<f64> {
        let Self { m1, m2, l1, l2, g } = *self;
        let c12 = (y[0] + y[1]).cos();
        Vector2::new(
            g * (m1 * l1 * y[0].cos() + m2 * (l1 * y[0].cos() + l2 * c12)),
            g * m2 * l2 * c12,
        )
    }

    /// `ÿ = M(y)⁻¹(u - C(y, ẏ)ẏ - G(y))`.
    pub fn acceleration(&self, y: [f64; 2], v: [f64; 2], u: [f64; 2]) -> Option<Vector2<f64>> {
        let rhs = Vector2::new(u[0], u[1]) - self.coriolis(y, v) * Vector2::new(v[0], v[1]) - self.gravity(y);
        self.mass(y).lu().solve(&rhs)
    }

    /// Largest condition number of `M` over a grid of elbow angles.
    pub fn worst_mass_condition(&self) -> f64 {
        (0..=64)
            .map(|i| {
                let y2 = std::f64::consts::PI * i as f64 / 32.0;
                let sv = self.mass([0.0, y2]).singular_values();
                if sv.min() > 0.0 {
                    sv.max() / sv.min()
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

/// The two-link arm as a system with `m = r = 2`; `T` passes `(y, ẏ)`.
pub fn robot_manipulator(m1: f64, m2: f64, l1: f64, l2: f64, g: f64) -> Result<FunctionalSystem, SystemError> {
    positive("m1", m1)?;
    positive("m2", m2)?;
    positive("l1", l1)?;
    positive("l2", l2)?;
    if !g.is_finite() {
        return Err(SystemError::Parameter("g must be finite".into()));
    }
    let arm = RobotArm { m1, m2, l1, l2, g };
    let cond = arm.worst_mass_condition();
    if cond > 1e12 {
        return Err(SystemError::SingularMass { cond });
    }
    let f: super::NonlinearityFn = Arc::new(move |_, z, u| {
        match arm.acceleration([z[0], z[1]], [z[2], z[3]], [u[0], u[1]]) {
            Some(a) => vec![a[0], a[1]],
            None => vec![f64::NAN; 2],
        }
    });
    FunctionalSystem::new(
        "robot",
        2,
        2,
        0,
        no_disturbance(),
        f,
        Arc::new(StackOperator { dim: 4 }),
        constant_history(vec![0.0; 4]),
    )
}

/// Second-order plant with dead-zone input and scalar internal dynamics.
#[derive(Debug, Clone)]
pub struct DeadZoneExample {
    pub alphas: [f64; 5],
    pub beta: DeadZone,
}

impl DeadZoneExample {
    pub fn f(&self, x1: f64, x2: f64, z: f64, u: f64) -> f64 {
        let [a1, a2, a3, _, _] = self.alphas;
        2.0 * x1 * x2 * x2 / (1.0 + x1 * x1) + a2 * x2 + (1.0 + x1 * x1) * (a1 * x1 + a3 * z + self.beta.eval(u))
    }

    pub fn internal(&self, eta0: f64) -> IssInternal {
        IssInternal { alpha4: self.alphas[3], alpha5: self.alphas[4], eta0 }
    }
}

/// Output `y = ξ_1`, so `ẏ(0) = (1 + ξ_1(0)²)ξ_2(0)`.
pub fn dead_zone_example_system(
    alphas: [f64; 5],
    beta: DeadZone,
    xi0: [f64; 2],
    eta0: f64,
) -> FunctionalSystem {
    let ex = DeadZoneExample { alphas, beta };
    let op = ex.internal(eta0);
    let f: super::NonlinearityFn = Arc::new(move |_, z, u| vec![ex.f(z[0], z[1], z[2], u[0])]);
    let y0 = vec![xi0[0], (1.0 + xi0[0] * xi0[0]) * xi0[1]];
    FunctionalSystem::new("dead-zone", 1, 2, 0, no_disturbance(), f, Arc::new(op), constant_history(y0))
        .expect("consistent dimensions")
}

/// `f(δ, z, u) = u·sin(ln(1 + |u|))`.
pub fn probe_f(u: f64) -> f64 {
    u * (1.0 + u.abs()).ln().sin()
}

/// `ẏ = u·sin(ln(1 + |u|))`.
pub fn probe_example_system(y0: f64) -> FunctionalSystem {
    let f: super::NonlinearityFn = Arc::new(|_, _, u| vec![probe_f(u[0])]);
    FunctionalSystem::new("probe", 1, 1, 0, no_disturbance(), f, Arc::new(ZeroOperator), constant_history(vec![y0]))
        .expect("consistent dimensions")
}

/// `y^{(r)} = u` with `m` channels; `y0` is the stacked initial data.
pub fn integrator_chain(m: usize, r: usize, y0: Vec<f64>) -> Result<FunctionalSystem, SystemError> {
    let f: super::NonlinearityFn = Arc::new(|_, _, u| u.to_vec());
    FunctionalSystem::new(
        format!("integrator-chain(m={m}, r={r})"),
        m,
        r,
        0,
        no_disturbance(),
        f,
        Arc::new(ZeroOperator),
        constant_history(y0),
    )
}

/// `ẏ(t) = tanh(y(t - h)) + 0.3·sin 2t + u(t)` with history `y(t) = 0.5 + 0.2t` on `[-h, 0]`.
pub fn delay_example_system(h: f64) -> Result<FunctionalSystem, SystemError> {
    let op = PointDelay::new(vec![Arc::new(|_, past: &[f64]| vec![past[0].tanh()])], vec![h], 1)?;
    let op: Arc<dyn Operator> = Arc::new(op);
    let f: super::NonlinearityFn = Arc::new(|d, z, u| vec![d[0] + z[0] + u[0]]);
    FunctionalSystem::new(
        format!("delay(h={h})"),
        1,
        1,
        1,
        Arc::new(|t: f64| vec![0.3 * (2.0 * t).sin()]),
        f,
        op,
        Arc::new(|t: f64| vec![0.5 + 0.2 * t]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::FnHistory;
    use proptest::prelude::*;
    use std::f64::consts::{E, FRAC_PI_4, PI};

    #[test]
    fn mass_on_car_entries() {
        let ss = mass_on_car_state_space(4.0, 1.0, 2.0, 1.0, 0.0).unwrap();
        assert!((ss.a[(3, 2)] + 2.5).abs() < 1e-15);
        let cb = (&ss.c * &ss.b)[(0, 0)];
        let cab = (&ss.c * &ss.a * &ss.b)[(0, 0)];
        let ca2b = (&ss.c * &ss.a * &ss.a * &ss.b)[(0, 0)];
        assert_eq!(cb, 0.0);
        assert!(cab.abs() < 1e-15);
        assert!((ca2b - 0.25).abs() < 1e-15);

        let ss = mass_on_car_state_space(4.0, 1.0, 2.0, 1.0, FRAC_PI_4).unwrap();
        let cab = (&ss.c * &ss.a * &ss.b)[(0, 0)];
        assert!((cab - 1.0 / 9.0).abs() < 1e-15);
        assert!(mass_on_car_state_space(-1.0, 1.0, 2.0, 1.0, 0.0).is_err());
        assert!(mass_on_car_state_space(4.0, 1.0, 2.0, 1.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn mass_on_car_matches_equations_of_motion(
            theta in 0.0f64..1.5, x in prop::collection::vec(-2.0f64..2.0, 4), u in -5.0f64..5.0,
        ) {
            // [[m1+m2, m2 cosθ], [m2 cosθ, m2]]·(z̈, s̈) + (0, ks + dṡ) = (u, 0)
            let (m1, m2, k, d) = (4.0, 1.0, 2.0, 1.0);
            let ss = mass_on_car_state_space(m1, m2, k, d, theta).unwrap();
            let xd = &ss.a * DVector::from_column_slice(&x) + &ss.b * u;
            let (zdd, sdd) = (xd[1], xd[3]);
            let c = theta.cos();
            let r1 = (m1 + m2) * zdd + m2 * c * sdd - u;
            let r2 = m2 * c * zdd + m2 * sdd + k * x[2] + d * x[3];
            prop_assert!(r1.abs() < 1e-12 && r2.abs() < 1e-12);
            prop_assert!((xd[0] - x[1]).abs() < 1e-15 && (xd[2] - x[3]).abs() < 1e-15);
        }

        #[test]
        fn robot_inverse_consistency(
            y in prop::collection::vec(-PI..PI, 2), v in prop::collection::vec(-3.0f64..3.0, 2),
            u in prop::collection::vec(-50.0f64..50.0, 2),
        ) {
            let arm = RobotArm { m1: 1.0, m2: 1.0, l1: 1.0, l2: 1.0, g: 9.81 };
            let (y, v, u) = ([y[0], y[1]], [v[0], v[1]], [u[0], u[1]]);
            let a = arm.acceleration(y, v, u).unwrap();
            let lhs = arm.mass(y) * a + arm.coriolis(y, v) * Vector2::new(v[0], v[1]) + arm.gravity(y);
            let scale = 1.0 + u[0].abs().max(u[1].abs());
            prop_assert!((lhs - Vector2::new(u[0], u[1])).amax() <= 1e-10 * scale);
        }
    }

    #[test]
    fn robot_matrices() {
        let arm = RobotArm { m1: 1.0, m2: 1.0, l1: 1.0, l2: 1.0, g: 9.81 };
        assert_eq!(arm.mass([0.0, 0.0]), Matrix2::new(5.0, 2.0, 2.0, 1.0));
        let g = arm.gravity([0.0, 0.0]);
        assert!((g[0] - 29.43).abs() < 1e-12 && (g[1] - 9.81).abs() < 1e-12);
        assert_eq!(arm.coriolis([0.3, 1.2], [0.0, 0.0]), Matrix2::zeros());
        let sys = robot_manipulator(1.0, 1.0, 1.0, 1.0, 9.81).unwrap();
        assert_eq!((sys.m(), sys.r(), sys.q()), (2, 2, 4));
        assert!(robot_manipulator(1.0, 1e-30, 1.0, 1.0, 9.81).is_err());
    }

    #[test]
    fn dead_zone_example_values() {
        let ex = DeadZoneExample { alphas: [1.0, -2.0, 1.0, 2.0, 1.0], beta: DeadZone::unit() };
        assert_eq!(ex.f(0.0, 0.0, 0.0, 2.0), 1.0);
        assert_eq!(ex.f(0.0, 0.0, 0.0, 0.5), 0.0);
        assert!((ex.f(1.0, 1.0, 0.0, 0.0) - 1.0).abs() < 1e-15);
        let sys = dead_zone_example_system([1.0, -2.0, 1.0, 2.0, 1.0], DeadZone::unit(), [0.5, 2.0], 0.0);
        assert_eq!(sys.initial_history(0.0), vec![0.5, 2.5]);
    }

    #[test]
    fn dead_zone_example_matches_state_equations() {
        // ÿ computed from the ξ-equations must equal f(T(y, ẏ), u)
        let alphas = [1.0, -2.0, 1.0, 2.0, 1.0];
        let ex = DeadZoneExample { alphas, beta: DeadZone::unit() };
        for &(xi1, xi2, eta, u) in &[(0.3, -0.7, 0.2, 1.7), (-1.2, 0.4, -0.5, -3.0), (0.0, 1.0, 1.0, 0.2)] {
            let xi2_dot = alphas[0] * xi1 + alphas[1] * xi2 + alphas[2] * eta + ex.beta.eval(u);
            let xi1_dot = (1.0 + xi1 * xi1) * xi2;
            let ydd = 2.0 * xi1 * xi1_dot * xi2 + (1.0 + xi1 * xi1) * xi2_dot;
            let y2 = xi1_dot;
            assert!((ex.f(xi1, y2, eta, u) - ydd).abs() < 1e-13);
        }
    }

    #[test]
    fn probe_values() {
        assert_eq!(probe_f(0.0), 0.0);
        assert!((probe_f(1.0) - 2f64.ln().sin()).abs() < 1e-15);
        assert!((probe_f(1.0) - 0.6390).abs() < 1e-4);
        let u1 = E.powf(PI) - 1.0;
        assert!((u1 - 22.1407).abs() < 1e-4);
        for k in 1..6 {
            let uk = (k as f64 * PI).exp() - 1.0;
            assert!(probe_f(uk).abs() < 1e-9 * uk);
        }
    }

    #[test]
    fn double_integrator_functional_form() {
        let ss = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let sys = linear_to_functional(&ss, &[1.0, -2.0]).unwrap();
        assert_eq!((sys.m(), sys.r()), (1, 2));
        assert_eq!(sys.initial_history(0.0), vec![1.0, -2.0]);
        let h = FnHistory { now: 0.0, start: 0.0, f: |_| vec![1.0, -2.0] };
        let ydd = sys.highest_derivative(0.7, &[3.0, 4.0], &[], &h, &[0.25]).unwrap();
        assert!((ydd[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn linear_functional_form_reproduces_state_space() {
        // integrate both forms with RK4 and compare outputs under the same input
        let ss = mass_on_car_state_space(4.0, 1.0, 2.0, 1.0, FRAC_PI_4).unwrap();
        let x0 = [0.1, -0.2, 0.3, 0.05];
        let sys = linear_to_functional(&ss, &x0).unwrap();
        let u = |t: f64| (0.7 * t).sin();
        let dt = 1e-3;
        let mut x = DVector::from_column_slice(&x0);
        let mut zeta = sys.initial_history(0.0);
        let mut eta = sys.operator().initial_state();
        let h = FnHistory { now: 0.0, start: 0.0, f: |_| vec![0.0, 0.0] };
        let rhs = |t: f64, z: &[f64], e: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let ydd = sys.highest_derivative(t, z, e, &h, &[u(t)]).unwrap();
            (vec![z[1], ydd[0]], sys.operator().state_derivative(t, z, e))
        };
        for i in 0..3000 {
            let t = i as f64 * dt;
            let fx = |t: f64, x: &DVector<f64>| &ss.a * x + &ss.b * u(t);
            let k1 = fx(t, &x);
            let k2 = fx(t + dt / 2.0, &(&x + &k1 * (dt / 2.0)));
            let k3 = fx(t + dt / 2.0, &(&x + &k2 * (dt / 2.0)));
            let k4 = fx(t + dt, &(&x + &k3 * dt));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

            let add = |a: &[f64], b: &[f64], s: f64| a.iter().zip(b).map(|(x, y)| x + s * y).collect::<Vec<_>>();
            let (a1, b1) = rhs(t, &zeta, &eta);
            let (a2, b2) = rhs(t + dt / 2.0, &add(&zeta, &a1, dt / 2.0), &add(&eta, &b1, dt / 2.0));
            let (a3, b3) = rhs(t + dt / 2.0, &add(&zeta, &a2, dt / 2.0), &add(&eta, &b2, dt / 2.0));
            let (a4, b4) = rhs(t + dt, &add(&zeta, &a3, dt), &add(&eta, &b3, dt));
            for j in 0..2 {
                zeta[j] += dt / 6.0 * (a1[j] + 2.0 * a2[j] + 2.0 * a3[j] + a4[j]);
                eta[j] += dt / 6.0 * (b1[j] + 2.0 * b2[j] + 2.0 * b3[j] + b4[j]);
            }
        }
        let y = (&ss.c * &x)[(0, 0)];
        let yd = (&ss.c * &ss.a * &x)[(0, 0)];
        assert!((y - zeta[0]).abs() < 1e-9, "{y} vs {}", zeta[0]);
        assert!((yd - zeta[1]).abs() < 1e-9);
    }

    #[test]
    fn delay_system_shape() {
        let sys = delay_example_system(0.5).unwrap();
        assert_eq!(sys.memory(), 0.5);
        assert_eq!(sys.initial_history(-0.5), vec![0.4]);
        assert!(delay_example_system(0.0).is_err());
    }
}
