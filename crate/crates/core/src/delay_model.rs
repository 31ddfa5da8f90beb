//! The multi-delay plant `x' = A x + Σ B_i u(t - τ_i)` and its
//! delay-reduced quantities.

use alloc::{format, vec::Vec};

use crate::linalg::{self, cluster_eigenvalues, complex_rank, to_complex, C64};
use crate::{Error, Matrix, Result};

/// Eigenvalues with real part at least this value are tested for
/// stabilizability.
pub const STABILIZABILITY_MARGIN: f64 = 1e-8;

/// Relative band around the imaginary axis: `1e-8 * (1 + ‖A‖_F)`.
pub const AXIS_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub b: Matrix,
    pub tau: f64,
}

/// Plant with one state matrix and `p ≥ 1` delayed input channels sorted by
/// non-decreasing delay. All input matrices share the shape `n x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySystem {
    a: Matrix,
    channels: Vec<Channel>,
}

impl DelaySystem {
    /// Validates and wraps a plant whose channels are already sorted.
    pub fn new(a: Matrix, channels: Vec<Channel>) -> Result<Self> {
        let n = linalg::ensure_square(&a, "state matrix")?;
        linalg::ensure_finite(&a, "state matrix")?;
        let first = channels
            .first()
            .ok_or_else(|| Error::Validation("a plant needs at least one input channel".into()))?;
        let m = first.b.ncols();
        for (i, ch) in channels.iter().enumerate() {
            if ch.b.nrows() != n || ch.b.ncols() != m {
                return Err(Error::Dimension(format!(
                    "channel {i} input matrix is {}x{}, expected {n}x{m}",
                    ch.b.nrows(),
                    ch.b.ncols()
                )));
            }
            linalg::ensure_finite(&ch.b, "input matrix")?;
            if !ch.tau.is_finite() || ch.tau < 0.0 {
                return Err(Error::Validation(format!(
                    "channel {i} delay must be finite and non-negative, got {}",
                    ch.tau
                )));
            }
        }
        if channels.windows(2).any(|w| w[1].tau < w[0].tau) {
            return Err(Error::Validation(
                "channel delays must be sorted non-decreasingly".into(),
            ));
        }
        Ok(Self { a, channels })
    }

    /// Sorts channels by delay (stable) before validation. The returned
    /// permutation maps sorted position to original position.
    pub fn from_unsorted(a: Matrix, mut channels: Vec<Channel>) -> Result<(Self, Vec<usize>)> {
        let mut order: Vec<usize> = (0..channels.len()).collect();
        if channels.iter().any(|c| c.tau.is_nan()) {
            return Err(Error::NonFinite("channel delay"));
        }
        order.sort_by(|&i, &j| channels[i].tau.total_cmp(&channels[j].tau));
        let mut slots: Vec<Option<Channel>> = channels.drain(..).map(Some).collect();
        let sorted = order.iter().map(|&i| slots[i].take().unwrap()).collect();
        Ok((Self::new(a, sorted)?, order))
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.channels[0].b.ncols()
    }

    pub fn max_delay(&self) -> f64 {
        self.channels.last().map_or(0.0, |c| c.tau)
    }

    /// Positive delays only; `None` when every channel is undelayed.
    pub fn min_positive_delay(&self) -> Option<f64> {
        self.channels.iter().map(|c| c.tau).find(|&t| t > 0.0)
    }

    /// `τ = Σ τ_i`: the sum of all channel delays, not the largest one.
    pub fn total_delay(&self) -> f64 {
        self.channels.iter().map(|c| c.tau).sum()
    }

    /// `B = Σ e^{-A τ_i} B_i`.
    pub fn reduced_input_matrix(&self) -> Matrix {
        let mut b = Matrix::zeros(self.state_dim(), self.input_dim());
        for ch in &self.channels {
            if ch.tau == 0.0 {
                b += &ch.b;
            } else {
                let e = linalg::expm(&self.a, -ch.tau).expect("validated square finite matrix");
                b += e * &ch.b;
            }
        }
        b
    }

    /// State similarity: `(T^{-1} A T, T^{-1} B_i)` with unchanged delays.
    pub fn transformed(&self, t: &Matrix) -> Result<Self> {
        let a = linalg::solve(t, &(&self.a * t), "similarity transform")?;
        let channels = self
            .channels
            .iter()
            .map(|c| {
                Ok(Channel {
                    b: linalg::solve(t, &c.b, "similarity transform")?,
                    tau: c.tau,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(a, channels)
    }

    /// Same plant with every input matrix multiplied by `factor`.
    pub fn with_scaled_inputs(&self, factor: f64) -> Self {
        Self {
            a: self.a.clone(),
            channels: self
                .channels
                .iter()
                .map(|c| Channel {
                    b: &c.b * factor,
                    tau: c.tau,
                })
                .collect(),
        }
    }

    pub fn check_assumptions(&self) -> Result<AssumptionReport> {
        let n = self.state_dim();
        let reduced_b = self.reduced_input_matrix();
        let eigenvalues_of_a = linalg::eigenvalues(&self.a)?;
        let a_norm = self.a.norm();

        // Defective eigenvalues split by O(sqrt(eps)); their cluster mean is
        // what gets compared with the axis band.
        let clusters = cluster_eigenvalues(&eigenvalues_of_a, 1e-6 * (1.0 + a_norm));
        let max_abs_re = clusters.iter().map(|(z, _)| z.re.abs()).fold(0.0, f64::max);
        let spectrum_on_axis = max_abs_re <= AXIS_TOLERANCE * (1.0 + a_norm);
        let max_real_part = clusters.iter().map(|(z, _)| z.re).fold(f64::NEG_INFINITY, f64::max);

        let controllable = linalg::controllability_rank(&self.a, &reduced_b)? == n;

        let a_c = to_complex(&self.a);
        let b_c = to_complex(&reduced_b);
        let stabilizable = clusters
            .iter()
            .filter(|(z, _)| z.re >= -STABILIZABILITY_MARGIN)
            .all(|&(lambda, _)| pbh_rank(&a_c, &b_c, lambda) == n);

        Ok(AssumptionReport {
            reduced_b,
            total_tau: self.total_delay(),
            stabilizable,
            controllable,
            spectrum_on_axis,
            eigenvalues_of_a,
            max_real_part,
        })
    }
}

/// Rank of `[A - λI, B]`.
fn pbh_rank(a: &crate::CMatrix, b: &crate::CMatrix, lambda: C64) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut pencil = crate::CMatrix::zeros(n, n + m);
    pencil.columns_mut(0, n).copy_from(a);
    for i in 0..n {
        pencil[(i, i)] -= lambda;
    }
    pencil.columns_mut(n, m).copy_from(b);
    complex_rank(&pencil)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub reduced_b: Matrix,
    pub total_tau: f64,
    pub stabilizable: bool,
    pub controllable: bool,
    pub spectrum_on_axis: bool,
    pub eigenvalues_of_a: Vec<C64>,
    pub max_real_part: f64,
}

impl AssumptionReport {
    /// Controllable reduced pair with the whole spectrum of `A` on the
    /// imaginary axis: the hypothesis of the low-gain designs.
    pub fn admits_low_gain_design(&self) -> bool {
        self.controllable && self.spectrum_on_axis
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::oscillator_plant;
    use alloc::vec;
    use core::f64::consts::PI;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn undelayed_channels_sum() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, 0.3]);
        let b1 = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b2 = Matrix::from_column_slice(2, 1, &[0.5, -1.0]);
        let sys = DelaySystem::new(
            a,
            vec![Channel { b: b1.clone(), tau: 0.0 }, Channel { b: b2.clone(), tau: 0.0 }],
        )
        .unwrap();
        assert_eq!(sys.reduced_input_matrix(), b1 + b2);
    }

    #[test]
    fn scalar_integrator_ignores_delays() {
        let sys = DelaySystem::new(
            scalar(0.0),
            vec![Channel { b: scalar(2.0), tau: 0.3 }, Channel { b: scalar(3.0), tau: 9.0 }],
        )
        .unwrap();
        assert_eq!(sys.reduced_input_matrix()[(0, 0)], 5.0);
    }

    #[test]
    fn benchmark_reduced_matrix() {
        let b = oscillator_plant().reduced_input_matrix();
        let expected = [-0.5, PI / 4.0 - 1.0, -1.0, 0.0];
        for (got, want) in b.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn total_delay_is_a_sum() {
        let mk = |taus: &[f64]| {
            DelaySystem::new(
                scalar(0.0),
                taus.iter().map(|&tau| Channel { b: scalar(1.0), tau }).collect(),
            )
            .unwrap()
            .total_delay()
        };
        assert_eq!(mk(&[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(mk(&[4.7]), 4.7);
        assert_eq!(oscillator_plant().total_delay(), PI / 2.0);
    }

    #[test]
    fn unsorted_channels_rejected_by_new_and_sorted_by_loader() {
        let chans = vec![
            Channel { b: scalar(1.0), tau: 2.0 },
            Channel { b: scalar(3.0), tau: 0.5 },
        ];
        assert!(DelaySystem::new(scalar(0.0), chans.clone()).is_err());
        let (sys, perm) = DelaySystem::from_unsorted(scalar(0.0), chans).unwrap();
        assert_eq!(perm, vec![1, 0]);
        assert_eq!(sys.channels()[0].tau, 0.5);
    }

    #[test]
    fn rejects_bad_channels() {
        assert!(DelaySystem::new(scalar(0.0), vec![]).is_err());
        let neg = vec![Channel { b: scalar(1.0), tau: -1.0 }];
        assert!(DelaySystem::new(scalar(0.0), neg).is_err());
        let wrong = vec![Channel { b: Matrix::zeros(2, 1), tau: 0.0 }];
        assert!(matches!(DelaySystem::new(scalar(0.0), wrong), Err(Error::Dimension(_))));
    }

    #[test]
    fn benchmark_assumptions_hold() {
        let r = oscillator_plant().check_assumptions().unwrap();
        assert!(r.controllable && r.spectrum_on_axis && r.stabilizable);
        assert!(r.admits_low_gain_design());
        assert_eq!(r.total_tau, PI / 2.0);
    }

    #[test]
    fn off_axis_spectrum_detected() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        let b = Matrix::from_column_slice(2, 1, &[1.0, 1.0]);
        let r = DelaySystem::new(a, vec![Channel { b, tau: 0.4 }])
            .unwrap()
            .check_assumptions()
            .unwrap();
        assert!(!r.spectrum_on_axis);
        assert!(r.controllable && r.stabilizable);
        assert!((r.max_real_part - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uncontrollable_unstable_mode_is_not_stabilizable() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -1.0]));
        let r = DelaySystem::new(a, vec![Channel { b: Matrix::zeros(2, 1), tau: 0.0 }])
            .unwrap()
            .check_assumptions()
            .unwrap();
        assert!(!r.stabilizable && !r.controllable);
    }

    #[test]
    fn stable_uncontrolled_mode_is_still_stabilizable() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -1.0]));
        let b = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let r = DelaySystem::new(a, vec![Channel { b, tau: 0.0 }])
            .unwrap()
            .check_assumptions()
            .unwrap();
        assert!(r.stabilizable && !r.controllable);
    }
}
