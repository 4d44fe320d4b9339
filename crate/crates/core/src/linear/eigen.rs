//! Dense nonsymmetric eigenvalues: Householder reduction to upper Hessenberg
//! form followed by the Francis implicit double-shift QR iteration.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::LinearError;

/// Iteration budget per eigenvalue before giving up.
const MAX_ITS: usize = 60;
const MAX_DIM: usize = 64;

/// Full complex spectrum of a real square matrix.
///
/// Complex pairs are returned adjacent, positive imaginary part first.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>, LinearError> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(LinearError::Shape(format!("matrix is {}x{}", n, m.ncols())));
    }
    if n > MAX_DIM {
        return Err(LinearError::Shape(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(LinearError::Shape("matrix has non-finite entries".into()));
    }
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    hessenberg(&mut a);
    hqr(&mut a)
}

/// In-place reduction to upper Hessenberg form by Householder reflections.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for k in 0..n.saturating_sub(2) {
        let alpha_norm: f64 = (k + 1..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if alpha_norm == 0.0 {
            continue;
        }
        let alpha = if a[k + 1][k] > 0.0 { -alpha_norm } else { alpha_norm };
        let mut v: Vec<f64> = (k + 1..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        // H = I - 2 v vᵀ / (vᵀv), applied as A ← H A H
        for j in 0..n {
            let dot: f64 = (0..v.len()).map(|i| v[i] * a[k + 1 + i][j]).sum();
            let f = 2.0 * dot / vnorm_sq;
            for i in 0..v.len() {
                a[k + 1 + i][j] -= f * v[i];
            }
        }
        for row in a.iter_mut() {
            let dot: f64 = (0..v.len()).map(|i| row[k + 1 + i] * v[i]).sum();
            let f = 2.0 * dot / vnorm_sq;
            for i in 0..v.len() {
                row[k + 1 + i] -= f * v[i];
            }
        }
        a[k + 1][k] = alpha;
        for row in a.iter_mut().skip(k + 2) {
            row[k] = 0.0;
        }
    }
}

#[inline]
fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix (destroyed on exit).
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<Complex64>, LinearError> {
    let n = a.len();
    let eps = f64::EPSILON;
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l >= 1 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= eps * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nu - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = if z != 0.0 { x - w / z } else { x + z };
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = z;
                    wi[nu] = -z;
                }
                nn -= 2;
                break;
            }
            if its == MAX_ITS {
                return Err(LinearError::Convergence { index: nu, iterations: its });
            }
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nu - 2;
            loop {
                let z = a[m][m];
                let rr = x - z;
                let s = y - z;
                p = (rr * s - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - s;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k + 1 != nu { a[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k + 1 != nu {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        let mut pp = x * row[k] + y * row[k + 1];
                        if k + 1 != nu {
                            pp += z * row[k + 2];
                            row[k + 2] -= pp * r;
                        }
                        row[k + 1] -= pp * q;
                        row[k] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    /// Smallest singular value of `M - λI`; zero exactly at eigenvalues.
    fn residual(m: &DMatrix<f64>, lambda: Complex64) -> f64 {
        let n = m.nrows();
        let shifted = DMatrix::from_fn(n, n, |i, j| {
            Complex64::new(m[(i, j)], 0.0) - if i == j { lambda } else { Complex64::new(0.0, 0.0) }
        });
        let sv = shifted.singular_values();
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn rotation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let ev = sorted(eigenvalues(&m).unwrap());
        assert!((ev[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn scalar_and_empty() {
        let ev = eigenvalues(&DMatrix::from_element(1, 1, -2.0)).unwrap();
        assert_eq!(ev, vec![Complex64::new(-2.0, 0.0)]);
        assert!(eigenvalues(&DMatrix::<f64>::zeros(0, 0)).unwrap().is_empty());
    }

    #[test]
    fn damped_closed_loop() {
        // λ² + λ + 1
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, 0.0]);
        let ev = sorted(eigenvalues(&m).unwrap());
        let h = 3f64.sqrt() / 2.0;
        assert!((ev[0] - Complex64::new(-0.5, -h)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(-0.5, h)).norm() < 1e-14);
    }

    #[test]
    fn companion_matrix_roots() {
        // (λ-1)(λ-2)(λ-3)(λ+4) = λ⁴ - 2λ³ - 13λ² + 38λ - 24
        let c = [-2.0, -13.0, 38.0, -24.0];
        let m = DMatrix::from_fn(4, 4, |i, j| if i == 0 { -c[j] } else if i == j + 1 { 1.0 } else { 0.0 });
        let ev = sorted(eigenvalues(&m).unwrap());
        for (e, want) in ev.iter().zip([-4.0, 1.0, 2.0, 3.0]) {
            assert!((e.re - want).abs() < 1e-10 && e.im.abs() < 1e-10, "{e}");
        }
    }

    #[test]
    fn agrees_with_reference_library() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3, 5, 8, 13, 20] {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let ours = sorted(eigenvalues(&m).unwrap());
            let theirs = sorted(m.complex_eigenvalues().iter().cloned().collect());
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).norm() < 1e-8, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(eigenvalues(&DMatrix::zeros(2, 3)), Err(LinearError::Shape(_))));
        assert!(matches!(eigenvalues(&DMatrix::zeros(65, 65)), Err(LinearError::Shape(_))));
    }

    #[test]
    fn defective_and_repeated() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 2.0]);
        let ev = eigenvalues(&m).unwrap();
        for e in ev {
            assert!((e - Complex64::new(2.0, 0.0)).norm() < 1e-4);
        }
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]));
        let ev = sorted(eigenvalues(&diag).unwrap());
        assert_eq!(ev.iter().map(|e| e.re).collect::<Vec<_>>(), vec![-1.0, -1.0, 1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn residuals_are_small(n in 1usize..12, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-5.0..5.0));
            let ev = eigenvalues(&m).unwrap();
            prop_assert_eq!(ev.len(), n);
            let scale = m.norm().max(1.0);
            for e in &ev {
                prop_assert!(residual(&m, *e) <= 1e-8 * scale, "λ = {}", e);
            }
            let trace: f64 = (0..n).map(|i| m[(i, i)]).sum();
            let sum: f64 = ev.iter().map(|e| e.re).sum();
            prop_assert!((trace - sum).abs() <= 1e-9 * scale * n as f64);
        }
    }
}
