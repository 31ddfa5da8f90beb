//! Trapezoidal discretisation of `ρ(t) = −F ∫_{t−τ}^{t} e^{(A+BF)(t−s)} B ρ(s) ds`.

use alloc::{format, vec, vec::Vec};

use nalgebra::DVector;

use super::{History, Trajectory};
use crate::linalg::{self, expm};
use crate::{Error, Matrix, Result};

/// Advances `ρ` on the grid `tₖ = k h`, `h = τ / K`. Each step solves
/// `(I + (h/2) F B) ρₖ = −[h Σ_{j=1}^{K−1} G(jh) ρ_{k−j} + (h/2) G(τ) ρ_{k−K}]`
/// with `G(θ) = F e^{(A+BF)θ} B`.
pub fn simulate_ids(
    f: &Matrix,
    a: &Matrix,
    b: &Matrix,
    tau: f64,
    init: &History,
    horizon: f64,
    h: f64,
) -> Result<Trajectory> {
    let n = linalg::ensure_square(a, "state matrix")?;
    let m = f.nrows();
    if f.ncols() != n || b.nrows() != n || b.ncols() != m {
        return Err(Error::Dimension(format!(
            "F is {}x{}, B is {}x{}, A is {n}x{n}",
            f.nrows(),
            f.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Range(format!("delay must be positive, got {tau}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Step(format!("step must be positive, got {h}")));
    }
    let kk = libm::round(tau / h);
    if kk < 1.0 || (kk * h - tau).abs() > 1e-9 * tau {
        return Err(Error::Step(format!("step {h} does not divide the delay {tau}")));
    }
    let kk = kk as usize;
    if !(horizon > 0.0) {
        return Err(Error::Range(format!("horizon must be positive, got {horizon}")));
    }
    if init.dim() != m {
        return Err(Error::Dimension(format!(
            "initial history has dimension {}, expected {m}",
            init.dim()
        )));
    }
    init.require_span(-tau, 0.0)?;

    let step = expm(&(a + b * f), h)?;
    let mut g = Vec::with_capacity(kk + 1);
    let mut eb = b.clone();
    for _ in 0..=kk {
        g.push(f * &eb);
        eb = &step * eb;
    }
    let lhs = Matrix::identity(m, m) + &g[0] * (h / 2.0);
    let lu = lhs.clone().lu();
    let diag: Vec<f64> = lu.u().diagonal().iter().map(|v| v.abs()).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|&d| d <= 1e-12 * dmax.max(1.0)) {
        return Err(Error::Step(format!(
            "step matrix I + (h/2)FB is singular at h = {h}; use a smaller step"
        )));
    }

    // rho[i] is the value at t = (i − K) h.
    let mut rho: Vec<DVector<f64>> = Vec::new();
    for i in 0..=kk {
        let t = (i as f64 - kk as f64) * h;
        rho.push(DVector::from_vec(init.eval(if i == kk { 0.0 } else { t })?));
    }
    let steps = libm::ceil(horizon / h - 1e-9) as usize;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![rho[kk].as_slice().to_vec()],
        derivatives: None,
        inputs: None,
    };
    for k in 1..=steps {
        let cur = kk + k;
        let mut acc = &g[kk] * &rho[cur - kk] * (h / 2.0);
        for j in 1..kk {
            acc.gemv(h, &g[j], &rho[cur - j], 1.0);
        }
        let next = lu.solve(&(-acc)).ok_or(Error::Singular {
            context: "integral delay step",
            pivot: 0.0,
        })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("integral delay state"));
        }
        traj.times.push(k as f64 * h);
        traj.states.push(next.as_slice().to_vec());
        rho.push(next);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (Matrix, Matrix, Matrix) {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let f = Matrix::from_row_slice(1, 2, &[-0.25, -1.0]);
        (a, b, f)
    }

    #[test]
    fn zero_history_stays_zero() {
        let (a, b, f) = pair();
        let init = History::constant(&[0.0], -1.0, 0.0).unwrap();
        let traj = simulate_ids(&f, &a, &b, 1.0, &init, 5.0, 0.01).unwrap();
        assert!(traj.states.iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn zero_gain_kills_the_history() {
        let (a, b, _) = pair();
        let init = History::constant(&[1.0], -1.0, 0.0).unwrap();
        let traj = simulate_ids(&Matrix::zeros(1, 2), &a, &b, 1.0, &init, 2.0, 0.1).unwrap();
        assert_eq!(traj.states[0], vec![1.0]);
        assert!(traj.states[1..].iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn misaligned_step_is_rejected() {
        let (a, b, f) = pair();
        let init = History::constant(&[1.0], -1.0, 0.0).unwrap();
        assert!(matches!(simulate_ids(&f, &a, &b, 1.0, &init, 2.0, 0.3), Err(Error::Step(_))));
    }
}
