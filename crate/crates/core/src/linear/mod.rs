//! Linear prototypes `ẋ = Ax + Bu, y = Cx`: strict relative degree,
//! Byrnes–Isidori form, zero dynamics and sign-definiteness of the
//! high-frequency gain.

mod eigen;

use std::fmt;

pub use eigen::eigenvalues;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

/// Relative threshold used for zero tests and invertibility.
pub const RANK_TOL: f64 = 1e-10;
/// Largest admissible condition number of the Byrnes–Isidori transform.
pub const MAX_COND: f64 = 1e10;
/// Eigenvalues of `Q` must have real part below `-STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("no strict relative degree")]
    NoRelativeDegree,
    #[error("relative degree mismatch: requested {requested}, actual {actual:?}")]
    RelativeDegreeMismatch { requested: usize, actual: Option<usize> },
    #[error("transformation is numerically rank deficient (condition {cond:e})")]
    NumericalRank { cond: f64 },
    #[error("eigenvalue iteration did not converge at index {index} after {iterations} iterations")]
    Convergence { index: usize, iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self, LinearError> {
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return Err(LinearError::Shape(format!("A is {}x{}", n, a.ncols())));
        }
        let m = b.ncols();
        if b.nrows() != n || c.ncols() != n || c.nrows() != m {
            return Err(LinearError::Shape(format!(
                "incompatible B ({}x{}) / C ({}x{}) for n = {n}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if m == 0 || m > n {
            return Err(LinearError::Shape(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(LinearError::Shape("non-finite entries".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// `C·A^k` for `k = 0..count`.
    fn observability_rows(&self, count: usize) -> Vec<DMatrix<f64>> {
        let mut rows = Vec::with_capacity(count);
        let mut ca = self.c.clone();
        for _ in 0..count {
            let next = &ca * &self.a;
            rows.push(ca);
            ca = next;
        }
        rows
    }
}

fn singular_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (min, max)
}

fn is_invertible(m: &DMatrix<f64>) -> bool {
    let (min, max) = singular_extremes(m);
    min > RANK_TOL * max.max(1.0)
}

/// Smallest `r` with `CA^kB = 0` for `k < r-1` and `Γ = CA^{r-1}B`
/// invertible, together with `Γ`.
pub fn relative_degree(ss: &StateSpace) -> Option<(usize, DMatrix<f64>)> {
    let scale = ss.c.norm() * ss.b.norm();
    let a_norm = ss.a.norm();
    for (k, ca) in ss.observability_rows(ss.n()).into_iter().enumerate() {
        let markov = &ca * &ss.b;
        if is_invertible(&markov) {
            return Some((k + 1, markov));
        }
        let tol = RANK_TOL * (scale * a_norm.powi(k as i32)).max(1.0);
        if markov.iter().any(|x| x.abs() >= tol) {
            return None;
        }
    }
    None
}

/// Blocks of the Byrnes–Isidori form
/// `y^{(r)} = Σ R_k y^{(k-1)} + Sη + Γu`, `η̇ = Py + Qη`.
#[derive(Debug, Clone, PartialEq)]
pub struct BIForm {
    pub r: usize,
    pub r_blocks: Vec<DMatrix<f64>>,
    pub s: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub u_inv: DMatrix<f64>,
}

impl BIForm {
    /// Dimension of the internal dynamics.
    pub fn internal_dim(&self) -> usize {
        self.q.nrows()
    }

    /// The transformed triple `(UAU⁻¹, UB, CU⁻¹)` assembled from the blocks.
    pub fn assembled(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let m = self.gamma.nrows();
        let k = self.internal_dim();
        let rm = self.r * m;
        let n = rm + k;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..self.r - 1 {
            a.view_mut((i * m, (i + 1) * m), (m, m)).fill_with_identity();
        }
        for (j, rj) in self.r_blocks.iter().enumerate() {
            a.view_mut(((self.r - 1) * m, j * m), (m, m)).copy_from(rj);
        }
        a.view_mut(((self.r - 1) * m, rm), (m, k)).copy_from(&self.s);
        a.view_mut((rm, 0), (k, m)).copy_from(&self.p);
        a.view_mut((rm, rm), (k, k)).copy_from(&self.q);
        let mut b = DMatrix::zeros(n, m);
        b.view_mut(((self.r - 1) * m, 0), (m, m)).copy_from(&self.gamma);
        let mut c = DMatrix::zeros(m, n);
        c.view_mut((0, 0), (m, m)).fill_with_identity();
        (a, b, c)
    }
}

/// Transforms a system of strict relative degree `r` into Byrnes–Isidori
/// form. The complement rows are `N = Vᵀ(I - B̂(ĈB̂)⁻¹Ĉ)` with `V` an
/// orthonormal basis of `ker Ĉ`, where `Ĉ` stacks `C, CA, …, CA^{r-1}` and
/// `B̂ = [B, AB, …, A^{r-1}B]`; this makes `NB = 0` and `NA^kB = 0` for
/// `k < r`, so the internal dynamics are driven by `y` alone.
pub fn byrnes_isidori(ss: &StateSpace, r: usize) -> Result<BIForm, LinearError> {
    let actual = relative_degree(ss);
    let gamma = match &actual {
        Some((rr, g)) if *rr == r => g.clone(),
        _ => {
            return Err(LinearError::RelativeDegreeMismatch {
                requested: r,
                actual: actual.map(|(rr, _)| rr),
            })
        }
    };
    let (n, m) = (ss.n(), ss.m());
    let rm = r * m;
    if rm > n {
        return Err(LinearError::Shape(format!("r·m = {rm} exceeds n = {n}")));
    }
    let mut c_hat = DMatrix::zeros(rm, n);
    for (k, row) in ss.observability_rows(r).iter().enumerate() {
        c_hat.view_mut((k * m, 0), (m, n)).copy_from(row);
    }
    let mut b_hat = DMatrix::zeros(n, rm);
    let mut akb = ss.b.clone();
    for k in 0..r {
        b_hat.view_mut((0, k * m), (n, m)).copy_from(&akb);
        akb = &ss.a * akb;
    }
    let cb = &c_hat * &b_hat;
    let cb_inv = cb
        .clone()
        .try_inverse()
        .ok_or(LinearError::NumericalRank { cond: f64::INFINITY })?;

    let k = n - rm;
    let mut u = DMatrix::zeros(n, n);
    u.view_mut((0, 0), (rm, n)).copy_from(&c_hat);
    if k > 0 {
        let v = kernel_basis(&c_hat, k);
        let proj = DMatrix::identity(n, n) - &b_hat * &cb_inv * &c_hat;
        let n_rows = v.transpose() * proj;
        u.view_mut((rm, 0), (k, n)).copy_from(&n_rows);
    }
    let (smin, smax) = singular_extremes(&u);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > MAX_COND {
        return Err(LinearError::NumericalRank { cond });
    }
    let u_inv = u.clone().try_inverse().ok_or(LinearError::NumericalRank { cond })?;
    let a_t = &u * &ss.a * &u_inv;

    let last = (r - 1) * m;
    let r_blocks = (0..r).map(|j| a_t.view((last, j * m), (m, m)).into_owned()).collect();
    Ok(BIForm {
        r,
        r_blocks,
        s: a_t.view((last, rm), (m, k)).into_owned(),
        p: a_t.view((rm, 0), (k, m)).into_owned(),
        q: a_t.view((rm, rm), (k, k)).into_owned(),
        gamma,
        u,
        u_inv,
    })
}

/// Orthonormal basis (as columns) of the `dim`-dimensional kernel of a full
/// row rank matrix.
fn kernel_basis(m: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let n = m.ncols();
    let mut padded = DMatrix::zeros(n, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    DMatrix::from_fn(n, dim, |i, j| v_t[(order[j], i)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroDynamics {
    pub stable: bool,
    pub eigenvalues: Vec<Complex64>,
    /// True when the pencil test agrees with the spectral verdict.
    pub pencil_consistent: bool,
}

/// Spectral test on `Q`, cross-checked against the system pencil
/// `[[λI - A, B], [C, 0]]` on sample points of the closed right half plane.
pub fn zero_dynamics_stable(ss: &StateSpace) -> Result<ZeroDynamics, LinearError> {
    let (r, _) = relative_degree(ss).ok_or(LinearError::NoRelativeDegree)?;
    let bi = byrnes_isidori(ss, r)?;
    let eig = eigenvalues(&bi.q)?;
    let stable = eig.iter().all(|l| l.re < -STABILITY_MARGIN);

    let mut samples = Vec::new();
    for re in [0.0, 0.5, 1.0, 2.0, 5.0] {
        for im in [0.0, 0.5, 1.0, 2.0, 5.0] {
            samples.push(Complex64::new(re, im));
            samples.push(Complex64::new(re, -im));
        }
    }
    samples.extend(eig.iter().map(|l| Complex64::new(l.re.abs(), l.im)));
    let pencil_consistent = if stable {
        samples.iter().all(|&l| !pencil_singular(ss, l))
    } else {
        eig.iter().filter(|l| l.re >= -STABILITY_MARGIN).all(|&l| pencil_singular(ss, l))
    };
    Ok(ZeroDynamics { stable, eigenvalues: eig, pencil_consistent })
}

/// The system pencil `[[λI - A, B], [C, 0]]`.
pub fn pencil(ss: &StateSpace, lambda: Complex64) -> DMatrix<Complex64> {
    let (n, m) = (ss.n(), ss.m());
    DMatrix::from_fn(n + m, n + m, |i, j| match (i < n, j < n) {
        (true, true) => {
            let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
            d - ss.a[(i, j)]
        }
        (true, false) => Complex64::new(ss.b[(i, j - n)], 0.0),
        (false, true) => Complex64::new(ss.c[(i - n, j)], 0.0),
        (false, false) => Complex64::new(0.0, 0.0),
    })
}

fn pencil_singular(ss: &StateSpace, lambda: Complex64) -> bool {
    let sv = pencil(ss, lambda).singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    min <= 1e-8 * max.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    Positive,
    Negative,
    Indefinite,
}

impl Definiteness {
    pub fn as_str(&self) -> &'static str {
        match self {
            Definiteness::Positive => "positive",
            Definiteness::Negative => "negative",
            Definiteness::Indefinite => "indefinite",
        }
    }
}

/// Sign-definiteness of `Γ` through the spectrum of its symmetric part.
pub fn sign_definiteness(gamma: &DMatrix<f64>) -> Definiteness {
    assert!(gamma.is_square(), "sign_definiteness needs a square matrix");
    let sym = (gamma + gamma.transpose()) * 0.5;
    let ev = SymmetricEigen::new(sym).eigenvalues;
    if ev.iter().all(|&l| l > RANK_TOL) {
        Definiteness::Positive
    } else if ev.iter().all(|&l| l < -RANK_TOL) {
        Definiteness::Negative
    } else {
        Definiteness::Indefinite
    }
}

/// Summary of the structural analysis of a linear plant.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReport {
    pub n: usize,
    pub m: usize,
    /// `None` when the plant has no strict relative degree.
    pub r: Option<usize>,
    pub gamma: Option<DMatrix<f64>>,
    pub definiteness: Option<Definiteness>,
    /// `None` when there are no internal dynamics or no relative degree.
    pub zero_dynamics: Option<ZeroDynamics>,
}

pub fn analyze(ss: &StateSpace) -> Result<LinearReport, LinearError> {
    let (n, m) = (ss.n(), ss.m());
    let Some((r, gamma)) = relative_degree(ss) else {
        return Ok(LinearReport { n, m, r: None, gamma: None, definiteness: None, zero_dynamics: None });
    };
    let definiteness = Some(sign_definiteness(&gamma));
    let zero_dynamics = if r * m < n { Some(zero_dynamics_stable(ss)?) } else { None };
    Ok(LinearReport { n, m, r: Some(r), gamma: Some(gamma), definiteness, zero_dynamics })
}

fn fmt_complex(z: &Complex64) -> String {
    if z.im.abs() < 1e-12 {
        format!("{:.6}", z.re)
    } else {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }
}

impl fmt::Display for LinearReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}, m={}", self.n, self.m)?;
        let (Some(r), Some(gamma), Some(def)) = (self.r, &self.gamma, self.definiteness) else {
            return writeln!(f, "no strict relative degree");
        };
        writeln!(f, "r={r}")?;
        let rows: Vec<String> = gamma
            .row_iter()
            .map(|row| row.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", "))
            .collect();
        if gamma.len() == 1 {
            writeln!(f, "Gamma={}", rows[0])?;
        } else {
            writeln!(f, "Gamma=[{}]", rows.join("; "))?;
        }
        writeln!(f, "sign={}", def.as_str())?;
        match &self.zero_dynamics {
            None => writeln!(f, "no internal dynamics"),
            Some(zd) => {
                let eig: Vec<String> = zd.eigenvalues.iter().map(fmt_complex).collect();
                writeln!(f, "eig(Q)={{{}}}", eig.join(", "))?;
                writeln!(f, "{}", if zd.stable { "minimum-phase" } else { "not minimum-phase" })?;
                writeln!(f, "pencil check {}", if zd.pencil_consistent { "consistent" } else { "INCONSISTENT" })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::mass_on_car_state_space;
    use std::f64::consts::FRAC_PI_4;

    fn double_integrator() -> StateSpace {
        StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap()
    }

    fn assert_structure(ss: &StateSpace, bi: &BIForm) {
        let (a, b, c) = bi.assembled();
        let ta = &bi.u * &ss.a * &bi.u_inv;
        let tb = &bi.u * &ss.b;
        let tc = &ss.c * &bi.u_inv;
        assert!((ta - &a).amax() < 1e-8);
        assert!((tb - &b).amax() < 1e-8);
        assert!((tc - &c).amax() < 1e-8);
        // round trip back to the original coordinates
        assert!((&bi.u_inv * a * &bi.u - &ss.a).amax() < 1e-8);
        assert!((&bi.u_inv * b - &ss.b).amax() < 1e-8);
        assert!((c * &bi.u - &ss.c).amax() < 1e-8);
    }

    #[test]
    fn double_integrator_analysis() {
        let ss = double_integrator();
        let (r, g) = relative_degree(&ss).unwrap();
        assert_eq!(r, 2);
        assert_eq!(g[(0, 0)], 1.0);
        let bi = byrnes_isidori(&ss, 2).unwrap();
        assert_eq!(bi.internal_dim(), 0);
        assert!(bi.r_blocks.iter().all(|b| b.amax() < 1e-14));
        assert_structure(&ss, &bi);
        let zd = zero_dynamics_stable(&ss).unwrap();
        assert!(zd.stable && zd.eigenvalues.is_empty() && zd.pencil_consistent);
    }

    #[test]
    fn mass_on_car_relative_degree() {
        let ss = mass_on_car_state_space(4.0, 1.0, 2.0, 1.0, FRAC_PI_4).unwrap();
        let (r, g) = relative_degree(&ss).unwrap();
        assert_eq!(r, 2);
        assert!((g[(0, 0)] - 1.0 / 9.0).abs() < 1e-14);

        let ss0 = mass_on_car_state_space(4.0, 1.0, 2.0, 1.0, 0.0).unwrap();
        let (r, g) = relative_degree(&ss0).unwrap();
        assert_eq!(r, 3);
        assert!((g[(0, 0)] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn mass_on_car_internal_dynamics() {
        let ss0 = mass_on_car_state_space(4.0, 1.0, 2.0, 1.0, 0.0).unwrap();
        let bi = byrnes_isidori(&ss0, 3).unwrap();
        assert_structure(&ss0, &bi);
        assert!((bi.q[(0, 0)] + 2.0).abs() < 1e-8);

        let ss = mass_on_car_state_space(4.0, 1.0, 2.0, 1.0, FRAC_PI_4).unwrap();
        let bi = byrnes_isidori(&ss, 2).unwrap();
        assert_structure(&ss, &bi);
        // d̃ = d/(m₂ sin²θ) = 2, k̃ = 4: trace -2, determinant 4
        let tr = bi.q.trace();
        let det = bi.q.determinant();
        assert!((tr + 2.0).abs() < 1e-8 && (det - 4.0).abs() < 1e-8);
        let zd = zero_dynamics_stable(&ss).unwrap();
        assert!(zd.stable && zd.pencil_consistent);
        for l in &zd.eigenvalues {
            assert!((l.re + 1.0).abs() < 1e-6 && (l.im.abs() - 3f64.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn non_minimum_phase_detected() {
        // G(s) = (s - 1)/(s² + 3s + 2) in controllable canonical form
        let ss = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]),
        )
        .unwrap();
        let zd = zero_dynamics_stable(&ss).unwrap();
        assert!(!zd.stable && zd.pencil_consistent);
        assert!((zd.eigenvalues[0].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn relative_degree_absent() {
        // rotation with gain diag(1, 0): the second output never sees u
        let ss = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        assert!(relative_degree(&ss).is_none());
        assert!(matches!(zero_dynamics_stable(&ss), Err(LinearError::NoRelativeDegree)));
    }

    #[test]
    fn mismatched_degree_rejected() {
        assert!(matches!(
            byrnes_isidori(&double_integrator(), 1),
            Err(LinearError::RelativeDegreeMismatch { requested: 1, actual: Some(2) })
        ));
    }

    #[test]
    fn definiteness_examples() {
        assert_eq!(sign_definiteness(&DMatrix::from_element(1, 1, 1.0)), Definiteness::Positive);
        assert_eq!(sign_definiteness(&DMatrix::from_element(1, 1, -0.5)), Definiteness::Negative);
        let l2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(sign_definiteness(&l2), Definiteness::Indefinite);
        let shear = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert_eq!(sign_definiteness(&shear), Definiteness::Indefinite);
        // positive definite but nonsymmetric
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 5.0, -5.0, 1.0]);
        assert_eq!(sign_definiteness(&skew), Definiteness::Positive);
    }

    #[test]
    fn shape_validation() {
        assert!(StateSpace::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 3), DMatrix::zeros(3, 2)).is_err());
        assert!(StateSpace::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1), DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn report_lines() {
        let car = mass_on_car_state_space(4.0, 1.0, 2.0, 1.0, 0.0).unwrap();
        let text = analyze(&car).unwrap().to_string();
        for line in ["r=3", "Gamma=0.250000", "sign=positive", "eig(Q)={-2.000000}", "minimum-phase", "consistent"] {
            assert!(text.lines().any(|l| l == line || l.ends_with(line)), "{line} missing from\n{text}");
        }
        let di = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let text = analyze(&di).unwrap().to_string();
        assert!(text.contains("r=2\nGamma=1.000000\nsign=positive\nno internal dynamics"), "{text}");
    }
}
