//! Design and analysis of feedback laws for linear plants whose input
//! reaches the state through several delayed channels,
//!
//! ```text
//! x'(t) = A x(t) + B_1 u(t - tau_1) + ... + B_p u(t - tau_p).
//! ```
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! * [`linalg`]: matrix exponential, nonsymmetric eigenvalues, ranks.
//! * [`delay_model`]: the plant, its reduced input matrix and the
//!   stabilizability/controllability checks.
//! * [`parametric_are`]: the low-gain parametric Riccati design.
//! * [`controllers`]: TPF and TPPF static gains, and the history-dependent
//!   pseudo-predictor and model-reduction laws.
//! * [`dde_sim`]: method-of-steps RK4 integration of retarded linear
//!   systems, dynamic closed loops and the integral delay system.
//! * [`spectrum`]: rightmost characteristic roots, spectral abscissa and
//!   the design-parameter sweep.
//! * [`consensus`]: networked agents over a directed graph.
//!
//! Parallel sweeps, file formats and the command line live in the
//! companion `delay-horizon-cli` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod consensus;
pub mod controllers;
pub mod dde_sim;
pub mod delay_model;
mod error;
pub mod families;
pub mod linalg;
pub mod parametric_are;
pub mod reference;
pub mod spectrum;

pub use error::{Error, Result};
pub use linalg::{CMatrix, Matrix, C64};
