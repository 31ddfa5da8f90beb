//! Dense real and complex kernels shared by every other module.
//!
//! Matrices are `nalgebra` dynamic matrices. Every public entry point
//! rejects non-finite input before doing any work.

use alloc::{format, vec::Vec};

use nalgebra::{Complex, DMatrix, Schur, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Similarity retries attempted when the QR iteration stalls.
pub const EIGEN_RETRIES: usize = 3;

/// Target 1-norm of the scaled argument before the Padé step.
const EXPM_SCALED_NORM: f64 = 0.5;

// Numerator coefficients of the [13/13] Padé approximant of exp.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// `|z|` without relying on `std` float methods.
pub fn cabs(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

/// `e^z`.
pub fn cexp(z: C64) -> C64 {
    let r = libm::exp(z.re);
    C64::new(r * libm::cos(z.im), r * libm::sin(z.im))
}

pub fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn ensure_square(m: &Matrix, what: &str) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Maximum absolute column sum.
pub fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// `e^{M t}` by scaling and squaring around a [13/13] Padé approximant.
///
/// The argument is halved until its 1-norm is at most 0.5, so the Padé
/// truncation error sits far below double precision and the accuracy is
/// governed by the squaring phase alone.
pub fn expm(m: &Matrix, t: f64) -> Result<Matrix> {
    let n = ensure_square(m, "expm argument")?;
    ensure_finite(m, "expm argument")?;
    if !t.is_finite() {
        return Err(Error::NonFinite("expm time"));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let x = m * t;
    let norm = norm1(&x);
    let squarings = if norm > EXPM_SCALED_NORM {
        libm::ceil(libm::log2(norm / EXPM_SCALED_NORM)) as i32
    } else {
        0
    };
    let x = x * libm::exp2(-f64::from(squarings));

    let id = Matrix::identity(n, n);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let b = &PADE13;

    let u_inner = &x6 * (&x6 * b[13] + &x4 * b[11] + &x2 * b[9])
        + &x6 * b[7]
        + &x4 * b[5]
        + &x2 * b[3]
        + &id * b[1];
    let u = &x * u_inner;
    let v = &x6 * (&x6 * b[12] + &x4 * b[10] + &x2 * b[8])
        + &x6 * b[6]
        + &x4 * b[4]
        + &x2 * b[2]
        + &id * b[0];

    let mut r = solve(&(&v - &u), &(&v + &u), "expm Pade denominator")?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Solves `A X = B` by partial-pivot LU.
///
/// A pivot below `1e-14` times the largest pivot is treated as singular;
/// the error carries the offending pivot magnitude.
pub fn solve(a: &Matrix, b: &Matrix, context: &'static str) -> Result<Matrix> {
    let n = ensure_square(a, context)?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "{context}: right-hand side has {} rows, expected {n}",
            b.nrows()
        )));
    }
    let lu = a.clone().lu();
    let (min_pivot, max_pivot) = pivot_range(&lu.u());
    if n > 0 && !(min_pivot > 1e-14 * max_pivot) {
        return Err(Error::Singular {
            context,
            pivot: min_pivot,
        });
    }
    lu.solve(b).ok_or(Error::Singular {
        context,
        pivot: min_pivot,
    })
}

fn pivot_range(u: &Matrix) -> (f64, f64) {
    let d = u.diagonal();
    let min = d.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let max = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
    (min, max)
}

/// All eigenvalues of a real square matrix, with multiplicity.
///
/// Uses Hessenberg reduction followed by shifted QR (real Schur form).
/// If the iteration stalls the matrix is conjugated by a random
/// well-conditioned similarity and the attempt repeated, up to
/// [`EIGEN_RETRIES`] times.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<C64>> {
    let n = ensure_square(m, "eigenvalue argument")?;
    ensure_finite(m, "eigenvalue argument")?;
    if n == 0 {
        return Ok(Vec::new());
    }
    if let Some(e) = schur_eigenvalues(m) {
        return Ok(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
    for _ in 0..EIGEN_RETRIES {
        let t = Matrix::from_fn(n, n, |i, j| {
            let r: f64 = rng.gen_range(-1.0..1.0);
            f64::from(u8::from(i == j)) + 0.25 * r / libm::sqrt(n as f64)
        });
        let Ok(conj) = solve(&t, &(m * &t), "eigenvalue similarity") else {
            continue;
        };
        if let Some(e) = schur_eigenvalues(&conj) {
            return Ok(e);
        }
    }
    Err(Error::NoConvergence {
        retries: EIGEN_RETRIES,
    })
}

fn schur_eigenvalues(m: &Matrix) -> Option<Vec<C64>> {
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 200 * n.max(10))?;
    let ev: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    ev.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(ev)
}

/// Largest real part in a spectrum (`-inf` for an empty one).
pub fn spectral_abscissa(eigs: &[C64]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn rank_from_singular_values(sv: impl Iterator<Item = f64> + Clone, rows: usize, cols: usize) -> usize {
    let smax = sv.clone().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let tol = (rows.max(cols) as f64) * f64::EPSILON * smax * 1e3;
    sv.filter(|&s| s > tol).count()
}

/// Numerical rank: singular values below `max(r, c) * eps * s_max * 1e3`
/// count as zero.
pub fn rank(m: &Matrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let svd = SVD::new(m.clone(), false, false);
    rank_from_singular_values(svd.singular_values.iter().copied(), m.nrows(), m.ncols())
}

/// Complex counterpart of [`rank`] with the same tolerance rule.
pub fn complex_rank(m: &CMatrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let svd = SVD::new(m.clone(), false, false);
    rank_from_singular_values(svd.singular_values.iter().copied(), m.nrows(), m.ncols())
}

/// Kalman matrix `[B, AB, ..., A^{n-1} B]`.
pub fn controllability_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a, "state matrix")?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "input matrix has {} rows, state dimension is {n}",
            b.nrows()
        )));
    }
    let m = b.ncols();
    let mut kalman = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        kalman.columns_mut(k * m, m).copy_from(&block);
        block = a * block;
    }
    Ok(kalman)
}

pub fn controllability_rank(a: &Matrix, b: &Matrix) -> Result<usize> {
    ensure_finite(a, "state matrix")?;
    ensure_finite(b, "input matrix")?;
    Ok(rank(&controllability_matrix(a, b)?))
}

/// Groups eigenvalues closer than `tol` (single linkage) and returns each
/// group's mean together with its size. Cluster means are far better
/// conditioned than the individual members of a defective eigenvalue.
pub fn cluster_eigenvalues(eigs: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let n = eigs.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if cabs(eigs[i] - eigs[j]) <= tol {
                let (ri, rj) = (root(&mut label, i), root(&mut label, j));
                if ri != rj {
                    label[rj.max(ri)] = rj.min(ri);
                }
            }
        }
    }
    let mut groups: Vec<(usize, C64, usize)> = Vec::new();
    for i in 0..n {
        let r = root(&mut label, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => {
                g.1 += eigs[i];
                g.2 += 1;
            }
            None => groups.push((r, eigs[i], 1)),
        }
    }
    groups
        .into_iter()
        .map(|(_, sum, count)| (sum / count as f64, count))
        .collect()
}

pub fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm(&Matrix::zeros(3, 3), 2.5).unwrap();
        assert_eq!(e, Matrix::identity(3, 3));
    }

    #[test]
    fn expm_quarter_rotation() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e = expm(&m, FRAC_PI_2).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(close(&e, &expected, 1e-14));
    }

    #[test]
    fn expm_matches_scalar_exponential_at_large_argument() {
        let m = Matrix::from_element(1, 1, -1.0);
        let e = expm(&m, 40.0).unwrap();
        let exact = libm::exp(-40.0);
        assert!(((e[(0, 0)] - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn expm_nilpotent_is_polynomial() {
        // e^{Nt} = I + Nt + N^2 t^2 / 2 for a 3x3 shift.
        let n = Matrix::from_row_slice(3, 3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.]);
        let t = 7.0;
        let expected = Matrix::identity(3, 3) + &n * t + &n * &n * (t * t / 2.0);
        assert!(close(&expm(&n, t).unwrap(), &expected, 1e-13));
    }

    #[test]
    fn expm_rejects_rectangular() {
        assert!(matches!(
            expm(&Matrix::zeros(2, 3), 1.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn expm_rejects_nan() {
        let mut m = Matrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(expm(&m, 1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn identity_eigenvalues() {
        let e = eigenvalues(&Matrix::identity(5, 5)).unwrap();
        assert_eq!(e.len(), 5);
        assert!(e.iter().all(|z| cabs(z - C64::new(1.0, 0.0)) < 1e-14));
    }

    #[test]
    fn defective_oscillator_spectrum() {
        let a = crate::reference::oscillator_chain();
        let e = eigenvalues(&a).unwrap();
        let up = e.iter().filter(|z| cabs(*z - C64::new(0.0, 1.0)) < 1e-6).count();
        let down = e.iter().filter(|z| cabs(*z - C64::new(0.0, -1.0)) < 1e-6).count();
        assert_eq!((up, down), (2, 2));
    }

    #[test]
    fn kalman_rank_examples() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![1.0, 2.0]));
        let b = Matrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert_eq!(controllability_rank(&a, &b).unwrap(), 2);
        assert_eq!(controllability_rank(&a, &Matrix::zeros(2, 1)).unwrap(), 0);
        let b = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(controllability_rank(&a, &b).unwrap(), 1);
    }

    #[test]
    fn solve_reports_singular_pivot() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let err = solve(&a, &Matrix::identity(2, 2), "test").unwrap_err();
        assert!(matches!(err, Error::Singular { context: "test", .. }));
    }
}
