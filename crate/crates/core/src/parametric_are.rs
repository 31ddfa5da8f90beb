//! Low-gain parametric Riccati design.
//!
//! For a controllable pair `(A, B)` with `σ(A)` on the imaginary axis the
//! Riccati equation `AᵀP + PA − PBBᵀP = −γP` has a unique positive definite
//! solution `P = W⁻¹` for every `γ > 0`, where `W` solves the Lyapunov
//! equation
//!
//! ```text
//! W (A + γ/2 I)ᵀ + (A + γ/2 I) W = B Bᵀ.
//! ```
//!
//! `F = −BᵀP` then makes `A + BF` Hurwitz and `P(γ) → 0` as `γ ↓ 0`.

use alloc::format;

use crate::linalg::{self, expm, symmetrize};
use crate::{Error, Matrix, Result};

/// Smallest accepted design parameter. Below it `W` grows like
/// `γ^{-(2k-1)}` for integrator chains of length `k` and its inverse is
/// meaningless in double precision.
pub const MIN_GAMMA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricGain {
    pub gamma: f64,
    pub w: Matrix,
    pub p: Matrix,
    pub f: Matrix,
    /// The (reduced) input matrix the design was carried out for.
    pub b: Matrix,
}

fn check_pair(a: &Matrix, b: &Matrix, gamma: f64) -> Result<usize> {
    let n = linalg::ensure_square(a, "state matrix")?;
    linalg::ensure_finite(a, "state matrix")?;
    linalg::ensure_finite(b, "input matrix")?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "input matrix has {} rows, state dimension is {n}",
            b.nrows()
        )));
    }
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::Range(format!("gamma must be positive, got {gamma}")));
    }
    if gamma < MIN_GAMMA {
        return Err(Error::Range(format!(
            "gamma {gamma:e} is below the supported minimum {MIN_GAMMA:e}"
        )));
    }
    Ok(n)
}

/// Solves `W Mᵀ + M W = B Bᵀ`, `M = A + γ/2 I`, by Kronecker vectorization
/// `(I ⊗ M + M ⊗ I) vec(W) = vec(B Bᵀ)` and symmetrizes the result.
pub fn solve_parametric_lyapunov(a: &Matrix, b: &Matrix, gamma: f64) -> Result<Matrix> {
    let n = check_pair(a, b, gamma)?;
    let id = Matrix::identity(n, n);
    let shifted = a + &id * (gamma / 2.0);
    let op = id.kronecker(&shifted) + shifted.kronecker(&id);
    let rhs = b * b.transpose();
    let rhs_vec = Matrix::from_column_slice(n * n, 1, rhs.as_slice());
    let w_vec = linalg::solve(&op, &rhs_vec, "parametric Lyapunov equation")?;
    let w = symmetrize(&Matrix::from_column_slice(n, n, w_vec.as_slice()));

    let min_eig = w.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_eig > 0.0) {
        return Err(Error::Consistency(format!(
            "Lyapunov solution is not positive definite (smallest eigenvalue {min_eig:.3e}); \
             (A, B) is probably not controllable"
        )));
    }
    Ok(w)
}

fn riccati_residual(a: &Matrix, b: &Matrix, gamma: f64, p: &Matrix) -> Matrix {
    let pb = p * b;
    symmetrize(&(a.transpose() * p + p * a - &pb * pb.transpose() + p * gamma))
}

/// Newton steps on the Riccati residual. `W⁻¹` loses `cond(W)·eps`
/// relative accuracy; each step solves
/// `Acᵀ Δ + Δ Ac = −R(P)`, `Ac = A − BBᵀP + γ/2 I`, which is well posed
/// because `σ(A − BBᵀP) = −γ − σ(A)`. Steps that do not shrink the
/// residual are discarded.
fn refine(a: &Matrix, b: &Matrix, gamma: f64, mut p: Matrix) -> Matrix {
    let n = p.nrows();
    let id = Matrix::identity(n, n);
    let mut res = riccati_residual(a, b, gamma, &p);
    for _ in 0..4 {
        let r_norm = res.norm();
        if r_norm <= 1e-15 * p.norm() {
            break;
        }
        let ac = a - b * (b.transpose() * &p) + &id * (gamma / 2.0);
        let op = id.kronecker(&ac.transpose()) + ac.transpose().kronecker(&id);
        let rhs = Matrix::from_column_slice(n * n, 1, (-&res).as_slice());
        let Ok(d) = linalg::solve(&op, &rhs, "Riccati refinement") else {
            break;
        };
        let next = symmetrize(&(&p + Matrix::from_column_slice(n, n, d.as_slice())));
        let next_res = riccati_residual(a, b, gamma, &next);
        if !(next_res.norm() < r_norm) {
            break;
        }
        p = next;
        res = next_res;
    }
    p
}

/// Full design bundle: `W`, `P = W⁻¹`, `F = −BᵀP`.
///
/// Fails with a consistency error if `A + BF` is not Hurwitz, which only
/// happens when the axis-spectrum/controllability hypothesis is violated.
pub fn gain(a: &Matrix, b: &Matrix, gamma: f64) -> Result<ParametricGain> {
    let w = solve_parametric_lyapunov(a, b, gamma)?;
    let n = w.nrows();
    let p = symmetrize(&linalg::solve(&w, &Matrix::identity(n, n), "Riccati solution W P = I")?);
    let p = refine(a, b, gamma, p);
    let f = -(b.transpose() * &p);
    let g = ParametricGain {
        gamma,
        w,
        p,
        f,
        b: b.clone(),
    };
    let abscissa = linalg::spectral_abscissa(&linalg::eigenvalues(&g.closed_loop(a))?);
    if !(abscissa < 0.0) {
        return Err(Error::Consistency(format!(
            "A + BF is not Hurwitz (spectral abscissa {abscissa:.3e})"
        )));
    }
    Ok(g)
}

impl ParametricGain {
    pub fn state_dim(&self) -> usize {
        self.p.nrows()
    }

    /// `A + B F`.
    pub fn closed_loop(&self, a: &Matrix) -> Matrix {
        a + &self.b * &self.f
    }

    /// `‖AᵀP + PA − PBBᵀP + γP‖ / ‖P‖`.
    pub fn are_residual(&self, a: &Matrix) -> f64 {
        let p = &self.p;
        let pb = p * &self.b;
        let r = a.transpose() * p + p * a - &pb * pb.transpose() + p * self.gamma;
        r.norm() / p.norm()
    }

    /// `‖W Mᵀ + M W − BBᵀ‖` with `M = A + γ/2 I`.
    pub fn lyapunov_residual(&self, a: &Matrix) -> f64 {
        let n = self.state_dim();
        let m = a + Matrix::identity(n, n) * (self.gamma / 2.0);
        (&self.w * m.transpose() + &m * &self.w - &self.b * self.b.transpose()).norm()
    }

    /// `‖P W − I‖`.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.state_dim();
        (&self.p * &self.w - Matrix::identity(n, n)).norm()
    }

    /// `tr(BᵀPB)`, which equals `n γ` whenever `tr A = 0`.
    pub fn input_energy_trace(&self) -> f64 {
        (self.b.transpose() * &self.p * &self.b).trace()
    }

    /// Relative gap `|tr(BᵀPB) − nγ| / (nγ)`.
    pub fn trace_identity_gap(&self) -> f64 {
        let target = self.state_dim() as f64 * self.gamma;
        (self.input_energy_trace() - target).abs() / target
    }

    /// Smallest eigenvalue of `nγP − PBBᵀP`, divided by `‖P‖`. The
    /// matrix inequality `PBBᵀP ≤ nγP` holds iff this is non-negative.
    pub fn psd_margin(&self) -> f64 {
        let n = self.state_dim() as f64;
        let pb = &self.p * &self.b;
        let d = symmetrize(&(&self.p * (n * self.gamma) - &pb * pb.transpose()));
        let min = d.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        min / self.p.norm()
    }
}

/// `‖P e^{(A+BF)t} − e^{−(A+γI)ᵀ t} P‖ / ‖P‖`.
pub fn commutation_residual(g: &ParametricGain, a: &Matrix, t: f64) -> Result<f64> {
    let n = g.state_dim();
    let lhs = &g.p * expm(&g.closed_loop(a), t)?;
    let shifted = (a + Matrix::identity(n, n) * g.gamma).transpose();
    let rhs = expm(&shifted, -t)? * &g.p;
    Ok((lhs - rhs).norm() / g.p.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::oscillator_plant;

    fn double_integrator() -> (Matrix, Matrix) {
        (
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
        )
    }

    #[test]
    fn scalar_integrator() {
        let one = Matrix::from_element(1, 1, 1.0);
        let zero = Matrix::from_element(1, 1, 0.0);
        for &g in &[0.01, 0.3, 2.0] {
            let w = solve_parametric_lyapunov(&zero, &one, g).unwrap();
            assert!((w[(0, 0)] - 1.0 / g).abs() < 1e-14 / g);
            let k = gain(&zero, &one, g).unwrap();
            assert!((k.p[(0, 0)] - g).abs() < 1e-14);
            assert!((k.f[(0, 0)] + g).abs() < 1e-14);
            assert!(commutation_residual(&k, &zero, 1.0).unwrap() < 1e-15);
        }
    }

    #[test]
    fn double_integrator_closed_forms() {
        // Hand solution of the 3 independent equations of the symmetric 2x2
        // Lyapunov system: w11 = 2/γ³, w12 = −1/γ², w22 = 1/γ.
        let (a, b) = double_integrator();
        for &g in &[0.05, 0.5, 1.7] {
            let w = solve_parametric_lyapunov(&a, &b, g).unwrap();
            let want_w = Matrix::from_row_slice(2, 2, &[2.0 / g.powi(3), -1.0 / g.powi(2), -1.0 / g.powi(2), 1.0 / g]);
            assert!((&w - &want_w).norm() <= 1e-12 * want_w.norm());
            let k = gain(&a, &b, g).unwrap();
            let want_p = Matrix::from_row_slice(2, 2, &[g.powi(3), g * g, g * g, 2.0 * g]);
            assert!((&k.p - &want_p).norm() <= 1e-12 * want_p.norm());
            assert!((k.f[(0, 0)] + g * g).abs() < 1e-12);
            assert!((k.f[(0, 1)] + 2.0 * g).abs() < 1e-12);
            assert!(k.trace_identity_gap() < 1e-12);
        }
    }

    #[test]
    fn benchmark_invariants() {
        let sys = oscillator_plant();
        let a = sys.a();
        let b = sys.reduced_input_matrix();
        for &g in &[0.05, 0.2, 0.3, 1.0] {
            let k = gain(a, &b, g).unwrap();
            assert!(k.are_residual(a) < 1e-8);
            assert!(k.trace_identity_gap() < 1e-8);
            assert!(k.psd_margin() > -1e-8);
            assert!(k.inverse_residual() < 1e-9 * (1.0 + k.w.norm() * k.p.norm()));
            assert!(k.lyapunov_residual(a) < 1e-10 * ((&b * b.transpose()).norm() + 1.0));
            assert_eq!(k.p, k.p.transpose());
        }
        let k = gain(a, &b, 0.3).unwrap();
        assert!(commutation_residual(&k, a, core::f64::consts::FRAC_PI_2).unwrap() < 1e-8);
        assert!(commutation_residual(&k, a, 0.0).unwrap() < 1e-15);
    }

    #[test]
    fn riccati_solution_vanishes_with_gamma() {
        let sys = oscillator_plant();
        let b = sys.reduced_input_matrix();
        let norms: alloc::vec::Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&g| gain(sys.a(), &b, g).unwrap().p.norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
        assert!(norms[3] < 1e-2 * norms[0]);
    }

    #[test]
    fn gamma_guards() {
        let (a, b) = double_integrator();
        assert!(matches!(gain(&a, &b, 0.0), Err(Error::Range(_))));
        assert!(matches!(gain(&a, &b, -1.0), Err(Error::Range(_))));
        assert!(matches!(gain(&a, &b, 1e-7), Err(Error::Range(_))));
        assert!(matches!(gain(&a, &b, f64::NAN), Err(Error::Range(_))));
    }

    #[test]
    fn uncontrollable_pair_is_rejected() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let b = Matrix::zeros(2, 1);
        assert!(gain(&a, &b, 0.5).is_err());
    }

    #[test]
    fn rejects_mismatched_input_rows() {
        let (a, _) = double_integrator();
        assert!(matches!(
            gain(&a, &Matrix::zeros(3, 1), 0.5),
            Err(Error::Dimension(_))
        ));
    }
}
