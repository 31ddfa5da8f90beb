//! Built-in benchmark plant and communication network.
//!
//! The plant is a pair of coupled unit-frequency oscillators (a defective
//! `±i` spectrum) driven through an undelayed channel and a channel
//! delayed by `π/2`. The network is a six-agent digraph whose Laplacian
//! has spectrum `{0, 1, 1, 2, 2, 3}`.

use alloc::vec;
use core::f64::consts::FRAC_PI_2;

use crate::delay_model::{Channel, DelaySystem};
use crate::Matrix;

/// Delay of the second channel of [`oscillator_plant`].
pub const OSCILLATOR_DELAY: f64 = FRAC_PI_2;

/// State matrix with eigenvalues `{±i, ±i}` in two Jordan chains.
pub fn oscillator_chain() -> Matrix {
    Matrix::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, 0.0, //
            -1.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, -1.0, 0.0,
        ],
    )
}

/// Two-channel benchmark: `x' = A x + B1 u(t) + B2 u(t - π/2)` with
/// `B1 = -e2` and `B2 = e4`.
pub fn oscillator_plant() -> DelaySystem {
    let b1 = Matrix::from_column_slice(4, 1, &[0.0, -1.0, 0.0, 0.0]);
    let b2 = Matrix::from_column_slice(4, 1, &[0.0, 0.0, 0.0, 1.0]);
    DelaySystem::new(
        oscillator_chain(),
        vec![
            Channel { b: b1, tau: 0.0 },
            Channel {
                b: b2,
                tau: OSCILLATOR_DELAY,
            },
        ],
    )
    .expect("benchmark plant is valid")
}

/// Weighted adjacency of the six-agent benchmark network;
/// `alpha[(i, j)] > 0` means agent `i` listens to agent `j`.
pub fn six_agent_adjacency() -> Matrix {
    let mut alpha = Matrix::zeros(6, 6);
    for &(i, j, w) in &[
        (0, 1, 2.0),
        (1, 0, 1.0),
        (2, 4, 2.0),
        (3, 2, 1.0),
        (4, 0, 2.0),
        (5, 4, 1.0),
    ] {
        alpha[(i, j)] = w;
    }
    alpha
}
