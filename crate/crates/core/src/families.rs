//! Random test families with spectra on the imaginary axis.
//!
//! Random dense matrices never have purely imaginary spectra, so the
//! generators build block-diagonal matrices of rotation blocks
//! `[[0, ω], [−ω, 0]]` and nilpotent/zero blocks and conjugate them by a
//! random well-conditioned similarity.

use alloc::vec::Vec;

use nalgebra::SVD;
use rand::Rng;

use crate::delay_model::{Channel, DelaySystem};
use crate::linalg::{self, controllability_rank};
use crate::parametric_are::solve_parametric_lyapunov;
use crate::Matrix;

/// Similarity `I + E` with `‖E‖` moderate and 2-norm condition below 10.
pub fn well_conditioned_similarity<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    loop {
        let t = Matrix::from_fn(n, n, |i, j| {
            let r: f64 = rng.gen_range(-1.0..1.0);
            f64::from(u8::from(i == j)) + 0.6 * r / libm::sqrt(n as f64)
        });
        let sv = SVD::new(t.clone(), false, false).singular_values;
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if smin > 0.0 && smax / smin < 10.0 {
            return t;
        }
    }
}

/// A state matrix whose eigenvalues all lie on the imaginary axis.
///
/// Frequencies of the rotation blocks are distinct, so a single input can
/// control the pair. Odd dimensions get one scalar zero block; even ones
/// occasionally trade a rotation for a 2x2 nilpotent (double integrator)
/// block.
pub fn imaginary_axis_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let mut a = Matrix::zeros(n, n);
    let mut used: Vec<f64> = Vec::new();
    let mut k = 0;
    if n % 2 == 1 {
        k = 1;
    } else if n >= 2 && rng.gen_bool(0.3) {
        a[(0, 1)] = 1.0;
        k = 2;
    }
    while k + 1 < n {
        let omega = loop {
            let w: f64 = rng.gen_range(0.3..2.5);
            if used.iter().all(|u| (u - w).abs() > 0.1) {
                break w;
            }
        };
        used.push(omega);
        a[(k, k + 1)] = omega;
        a[(k + 1, k)] = -omega;
        k += 2;
    }
    let t = well_conditioned_similarity(rng, n);
    linalg::solve(&t, &(&a * &t), "family similarity").expect("well-conditioned similarity")
}

/// Random `(A, B)` with `σ(A)` on the axis and `(A, B)` controllable.
pub fn imaginary_axis_pair<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> (Matrix, Matrix) {
    let a = imaginary_axis_matrix(rng, n);
    loop {
        let b = Matrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
        if controllability_rank(&a, &b).expect("shapes agree") == n {
            return (a, b);
        }
    }
}

/// Largest accepted condition number of the Lyapunov solution `W` at
/// `γ = 1`. Rank tests accept pairs that are a rounding error away from
/// uncontrollable; for those `P = W⁻¹` has no correct digits left.
pub const MAX_DESIGN_CONDITION: f64 = 1e8;

fn well_controlled(a: &Matrix, b: &Matrix) -> bool {
    if controllability_rank(a, b).expect("shapes agree") != a.nrows() {
        return false;
    }
    let Ok(w) = solve_parametric_lyapunov(a, b, 1.0) else {
        return false;
    };
    let sv = SVD::new(w, false, false).singular_values;
    sv.max() <= MAX_DESIGN_CONDITION * sv.min()
}

/// Random multi-delay plant whose reduced pair satisfies the low-gain
/// hypothesis with a design condition below [`MAX_DESIGN_CONDITION`].
/// Delays are drawn from `[0, max_tau]`; the first channel is undelayed.
pub fn imaginary_axis_plant<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    channels: usize,
    max_tau: f64,
) -> DelaySystem {
    let a = imaginary_axis_matrix(rng, n);
    loop {
        let mut taus: Vec<f64> = (0..channels)
            .map(|i| if i == 0 { 0.0 } else { rng.gen_range(0.0..max_tau) })
            .collect();
        taus.sort_by(f64::total_cmp);
        let chans = taus
            .into_iter()
            .map(|tau| Channel {
                b: Matrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0)),
                tau,
            })
            .collect();
        let sys = DelaySystem::new(a.clone(), chans).expect("valid random plant");
        if well_controlled(&a, &sys.reduced_input_matrix()) {
            return sys;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_spectra_sit_on_the_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=8 {
            let sys = imaginary_axis_plant(&mut rng, n, 1 + n % 2, 3, 2.0);
            let report = sys.check_assumptions().unwrap();
            assert!(report.admits_low_gain_design(), "n = {n}: {report:?}");
        }
    }
}
