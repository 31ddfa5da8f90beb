//! Static (TPF, TPPF) and history-dependent (PPF, model reduction) control
//! laws, and the predictor-state transforms they are built from.
//!
//! Distributed terms are integrals of the form `∫ G(s) u(s) ds` over a
//! window ending at or before the current time. They are discretised once,
//! at construction, into a [`Kernel`]: a list of time offsets `θⱼ ≤ 0` and
//! matrix weights `Kⱼ` with `∫ ≈ Σⱼ Kⱼ u(t + θⱼ)`.

use alloc::{format, vec, vec::Vec};

use nalgebra::DVector;

use crate::dde_sim::History;
use crate::delay_model::DelaySystem;
use crate::linalg::expm;
use crate::parametric_are::ParametricGain;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StaticKind {
    Tpf,
    Tppf,
}

/// A constant state feedback `u = K x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticGain {
    pub kind: StaticKind,
    pub k: Matrix,
    pub gamma: f64,
    pub provenance: ParametricGain,
}

fn check_design(sys: &DelaySystem, g: &ParametricGain) -> Result<()> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    if g.f.nrows() != m || g.f.ncols() != n {
        return Err(Error::Dimension(format!(
            "gain is {}x{}, system needs {m}x{n}",
            g.f.nrows(),
            g.f.ncols()
        )));
    }
    Ok(())
}

/// Truncated predictor feedback: `K = F`.
pub fn tpf_gain(sys: &DelaySystem, g: &ParametricGain) -> Result<StaticGain> {
    check_design(sys, g)?;
    Ok(StaticGain {
        kind: StaticKind::Tpf,
        k: g.f.clone(),
        gamma: g.gamma,
        provenance: g.clone(),
    })
}

/// Truncated pseudo-predictor feedback: `K = F e^{(A+BF)τ} e^{−Aτ}` with
/// `τ` the total delay.
pub fn tppf_gain(sys: &DelaySystem, g: &ParametricGain) -> Result<StaticGain> {
    check_design(sys, g)?;
    let tau = sys.total_delay();
    let k = if tau == 0.0 {
        g.f.clone()
    } else {
        &g.f * expm(&g.closed_loop(sys.a()), tau)? * expm(sys.a(), -tau)?
    };
    Ok(StaticGain {
        kind: StaticKind::Tppf,
        k,
        gamma: g.gamma,
        provenance: g.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// Discretised linear functional of an input history.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    dim: usize,
    offsets: Vec<f64>,
    sides: Vec<Side>,
    weights: Vec<Matrix>,
}

impl Kernel {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            offsets: Vec::new(),
            sides: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Adds Simpson panels for `∫_{t+lo}^{t+hi} G(s − t) u(s) ds`.
    ///
    /// Panel boundaries sit on the multiples of `step` inside `(lo, hi)`
    /// plus the two ends, so for `t` on a simulation grid of spacing `step`
    /// a jump of the input at a grid time falls on a boundary. Each panel
    /// reads the one-sided limit of `u` at its own ends.
    pub fn add_simpson<G>(&mut self, lo: f64, hi: f64, step: f64, mut g: G) -> Result<()>
    where
        G: FnMut(f64) -> Result<Matrix>,
    {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Range(format!("quadrature step must be positive, got {step}")));
        }
        if !(hi - lo > 0.0) {
            return Ok(());
        }
        let min_width = 1e-6 * step;
        let mut bounds = vec![lo];
        let first = libm::ceil(lo / step) as i64;
        let last = libm::floor(hi / step) as i64;
        for j in first..=last {
            let b = j as f64 * step;
            if b - bounds[bounds.len() - 1] >= min_width && hi - b >= min_width {
                bounds.push(b);
            }
        }
        bounds.push(hi);
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = b - a;
            for (theta, side, c) in [
                (a, Side::Right, 1.0),
                (0.5 * (a + b), Side::Right, 4.0),
                (b, Side::Left, 1.0),
            ] {
                let kj = g(theta)? * (c * len / 6.0);
                if kj.nrows() != self.dim {
                    return Err(Error::Dimension(format!(
                        "kernel weight has {} rows, expected {}",
                        kj.nrows(),
                        self.dim
                    )));
                }
                self.offsets.push(theta);
                self.sides.push(side);
                self.weights.push(kj);
            }
        }
        Ok(())
    }

    /// Smallest and largest offset, or `(0, 0)` for an empty kernel.
    pub fn window(&self) -> (f64, f64) {
        let lo = self.offsets.iter().copied().fold(0.0, f64::min);
        let hi = self.offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi.is_finite() { hi } else { 0.0 })
    }

    pub fn nodes(&self) -> usize {
        self.offsets.len()
    }

    /// `Σⱼ Kⱼ u(t + θⱼ)`.
    pub fn apply(&self, history: &History, t: f64) -> Result<DVector<f64>> {
        let mut acc = DVector::zeros(self.dim);
        if self.offsets.is_empty() {
            return Ok(acc);
        }
        let (lo, hi) = self.window();
        history.require_span(t + lo, t + hi)?;
        let mut u = DVector::zeros(history.dim());
        for ((theta, side), k) in self.offsets.iter().zip(&self.sides).zip(&self.weights) {
            if k.ncols() != u.len() {
                return Err(Error::Dimension(format!(
                    "input history has dimension {}, kernel expects {}",
                    u.len(),
                    k.ncols()
                )));
            }
            match side {
                Side::Left => history.eval_left_into(t + theta, u.as_mut_slice())?,
                Side::Right => history.eval_into(t + theta, u.as_mut_slice())?,
            }
            acc.gemv(1.0, k, &u, 1.0);
        }
        Ok(acc)
    }
}

/// Kernel of `Σᵢ ∫_{t−τᵢ}^{t} e^{A(t−τᵢ−s)} Bᵢ u(s) ds`.
pub fn model_reduction_kernel(sys: &DelaySystem, step: f64) -> Result<Kernel> {
    let mut k = Kernel::empty(sys.state_dim());
    for ch in sys.channels() {
        k.add_simpson(-ch.tau, 0.0, step, |theta| {
            Ok(expm(sys.a(), -ch.tau - theta)? * &ch.b)
        })?;
    }
    Ok(k)
}

/// Kernel of `φ(t) = Σᵢ ∫_{t−τ}^{t−τᵢ} e^{A(t−s−τᵢ)} Bᵢ u(s) ds`.
pub fn pseudo_predictor_kernel(sys: &DelaySystem, step: f64) -> Result<Kernel> {
    let tau = sys.total_delay();
    let mut k = Kernel::empty(sys.state_dim());
    for ch in sys.channels() {
        k.add_simpson(-tau, -ch.tau, step, |theta| {
            Ok(expm(sys.a(), -theta - ch.tau)? * &ch.b)
        })?;
    }
    Ok(k)
}

fn check_state(sys: &DelaySystem, x: &DVector<f64>) -> Result<()> {
    if x.len() != sys.state_dim() {
        return Err(Error::Dimension(format!(
            "state has dimension {}, system has {}",
            x.len(),
            sys.state_dim()
        )));
    }
    Ok(())
}

/// Model-reduction state `z(t) = x(t) + Σᵢ ∫_{t−τᵢ}^{t} e^{A(t−τᵢ−s)} Bᵢ u(s) ds`
/// with `t` the end of `history`.
pub fn predictor_state_z(
    sys: &DelaySystem,
    x_now: &DVector<f64>,
    history: &History,
    step: f64,
) -> Result<DVector<f64>> {
    check_state(sys, x_now)?;
    Ok(x_now + model_reduction_kernel(sys, step)?.apply(history, history.t_max())?)
}

/// The same state built through the nested chain `y_p → … → y_1`,
/// `y = e^{−Aτ} y_1`, one channel at a time from the longest delay down.
pub fn predictor_state_y_recursive(
    sys: &DelaySystem,
    x_now: &DVector<f64>,
    history: &History,
    step: f64,
) -> Result<DVector<f64>> {
    check_state(sys, x_now)?;
    let a = sys.a();
    let t = history.t_max();
    let mut y = x_now.clone();
    let mut later = 0.0;
    for ch in sys.channels().iter().rev() {
        // ∫_t^{t+τ_k} e^{A(t+τ_k−s)} e^{A S_k} B_k u(s − τ_k) ds, shifted so
        // the kernel offset is θ = s − t − τ_k ∈ [−τ_k, 0].
        let mut k = Kernel::empty(sys.state_dim());
        let lift = expm(a, later)? * &ch.b;
        k.add_simpson(-ch.tau, 0.0, step, |theta| Ok(expm(a, -theta)? * &lift))?;
        y = expm(a, ch.tau)? * y + k.apply(history, t)?;
        later += ch.tau;
    }
    Ok(expm(a, -sys.total_delay())? * y)
}

/// `e^{−Aτ} x(t+τ) − Σᵢ ∫_t^{t+τ−τᵢ} e^{A(t−s−τᵢ)} Bᵢ u(s) ds`: the
/// predictor state recovered from the future state of the open loop.
/// `history` must extend to `t + τ − τ_1`.
pub fn predictor_state_from_future(
    sys: &DelaySystem,
    x_future: &DVector<f64>,
    history: &History,
    t: f64,
    step: f64,
) -> Result<DVector<f64>> {
    check_state(sys, x_future)?;
    let tau = sys.total_delay();
    let mut k = Kernel::empty(sys.state_dim());
    for ch in sys.channels() {
        k.add_simpson(0.0, tau - ch.tau, step, |theta| {
            Ok(expm(sys.a(), -theta - ch.tau)? * &ch.b)
        })?;
    }
    Ok(expm(sys.a(), -tau)? * x_future - k.apply(history, t)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HistoryKind {
    PseudoPredictor,
    ModelReduction,
}

/// Control law that reads the past input: `u = Kₛ (x ± Σ Kⱼ u(t+θⱼ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryController {
    pub kind: HistoryKind,
    pub f: Matrix,
    /// Multiplier applied to the corrected state: `F` for model reduction,
    /// the TPPF gain for PPF.
    pub gain: Matrix,
    pub system: DelaySystem,
    pub quadrature_step: f64,
    kernel: Kernel,
}

impl HistoryController {
    /// `u = F e^{(A+BF)τ} e^{−Aτ} (x − φ)`.
    pub fn pseudo_predictor(sys: &DelaySystem, g: &ParametricGain, step: f64) -> Result<Self> {
        let k = tppf_gain(sys, g)?;
        Ok(Self {
            kind: HistoryKind::PseudoPredictor,
            f: g.f.clone(),
            gain: k.k,
            system: sys.clone(),
            quadrature_step: step,
            kernel: pseudo_predictor_kernel(sys, step)?,
        })
    }

    /// `u = F z`.
    pub fn model_reduction(sys: &DelaySystem, g: &ParametricGain, step: f64) -> Result<Self> {
        check_design(sys, g)?;
        Ok(Self {
            kind: HistoryKind::ModelReduction,
            f: g.f.clone(),
            gain: g.f.clone(),
            system: sys.clone(),
            quadrature_step: step,
            kernel: model_reduction_kernel(sys, step)?,
        })
    }

    /// Length of past input the law reads.
    pub fn required_span(&self) -> f64 {
        -self.kernel.window().0
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.kernel.nodes()
    }

    /// Corrected state the gain acts on (`x − φ` or `z`) at time `t`.
    pub fn corrected_state(&self, x: &DVector<f64>, history: &History, t: f64) -> Result<DVector<f64>> {
        check_state(&self.system, x)?;
        let d = self.kernel.apply(history, t)?;
        Ok(match self.kind {
            HistoryKind::PseudoPredictor => x - d,
            HistoryKind::ModelReduction => x + d,
        })
    }

    pub fn evaluate_at(&self, x: &DVector<f64>, history: &History, t: f64) -> Result<DVector<f64>> {
        Ok(&self.gain * self.corrected_state(x, history, t)?)
    }

    /// Control at the end of `history`.
    pub fn evaluate(&self, x: &DVector<f64>, history: &History) -> Result<DVector<f64>> {
        self.evaluate_at(x, history, history.t_max())
    }
}

fn expect_kind(hc: &HistoryController, kind: HistoryKind) -> Result<()> {
    if hc.kind != kind {
        return Err(Error::Validation(format!("expected a {kind:?} controller, got {:?}", hc.kind)));
    }
    Ok(())
}

pub fn ppf_control(hc: &HistoryController, x_now: &DVector<f64>, history: &History) -> Result<DVector<f64>> {
    expect_kind(hc, HistoryKind::PseudoPredictor)?;
    hc.evaluate(x_now, history)
}

pub fn model_reduction_control(
    hc: &HistoryController,
    x_now: &DVector<f64>,
    history: &History,
) -> Result<DVector<f64>> {
    expect_kind(hc, HistoryKind::ModelReduction)?;
    hc.evaluate(x_now, history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay_model::Channel;
    use crate::parametric_are::gain;
    use crate::reference::oscillator_plant;

    fn scalar(taus: &[f64]) -> DelaySystem {
        DelaySystem::new(
            Matrix::zeros(1, 1),
            taus.iter()
                .map(|&tau| Channel { b: Matrix::from_element(1, 1, 1.0), tau })
                .collect(),
        )
        .unwrap()
    }

    fn smooth_input(from: f64, to: f64) -> History {
        History::from_fn(1, from, to, 400, |t| {
            (vec![libm::sin(2.0 * t) + 0.5], vec![2.0 * libm::cos(2.0 * t)])
        })
        .unwrap()
    }

    #[test]
    fn zero_delay_tppf_is_f() {
        let sys = scalar(&[0.0]);
        let g = gain(sys.a(), &sys.reduced_input_matrix(), 0.4).unwrap();
        assert_eq!(tppf_gain(&sys, &g).unwrap().k, g.f);
    }

    #[test]
    fn unit_window_integral() {
        let sys = scalar(&[1.0]);
        let hist = History::constant(&[1.0], -1.0, 0.0).unwrap();
        let z = predictor_state_z(&sys, &DVector::from_element(1, 2.0), &hist, 0.01).unwrap();
        assert!((z[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_history_reduces_to_static_laws() {
        let sys = oscillator_plant();
        let g = gain(sys.a(), &sys.reduced_input_matrix(), 0.3).unwrap();
        let hist = History::constant(&[0.0], -sys.total_delay(), 0.0).unwrap();
        let x = DVector::from_column_slice(&[1.0, -0.5, 0.25, 2.0]);
        let ppf = HistoryController::pseudo_predictor(&sys, &g, 0.01).unwrap();
        let mr = HistoryController::model_reduction(&sys, &g, 0.01).unwrap();
        let k = tppf_gain(&sys, &g).unwrap().k;
        assert!((ppf_control(&ppf, &x, &hist).unwrap() - &k * &x).norm() < 1e-15);
        assert!((model_reduction_control(&mr, &x, &hist).unwrap() - &g.f * &x).norm() < 1e-15);
        assert!(model_reduction_control(&ppf, &x, &hist).is_err());
    }

    #[test]
    fn short_history_is_an_error() {
        let sys = oscillator_plant();
        let hist = History::constant(&[0.0], -1.0, 0.0).unwrap();
        let x = DVector::zeros(4);
        assert!(matches!(
            predictor_state_z(&sys, &x, &hist, 0.01),
            Err(Error::History { .. })
        ));
    }

    #[test]
    fn quadrature_converges_under_refinement() {
        let sys = scalar(&[0.0, 1.0]);
        let g = gain(sys.a(), &sys.reduced_input_matrix(), 0.5).unwrap();
        let hist = smooth_input(-1.0, 0.0);
        let x = DVector::from_element(1, 0.3);
        let coarse = HistoryController::pseudo_predictor(&sys, &g, 0.05).unwrap();
        let fine = HistoryController::pseudo_predictor(&sys, &g, 0.005).unwrap();
        let (uc, uf) = (coarse.evaluate(&x, &hist).unwrap(), fine.evaluate(&x, &hist).unwrap());
        assert!((uc - &uf).norm() < 1e-6 * (1.0 + uf.norm()));
    }

    #[test]
    fn chain_and_direct_predictor_states_agree() {
        let sys = oscillator_plant();
        let hist = History::from_fn(1, -3.0, 0.0, 600, |t| {
            (vec![libm::cos(t) - 0.3 * t], vec![-libm::sin(t) - 0.3])
        })
        .unwrap();
        let x = DVector::from_column_slice(&[0.2, 1.0, -0.7, 0.4]);
        let z = predictor_state_z(&sys, &x, &hist, 0.01).unwrap();
        let y = predictor_state_y_recursive(&sys, &x, &hist, 0.01).unwrap();
        assert!((&y - &z).norm() < 1e-10 * (1.0 + z.norm()), "{y} vs {z}");
    }
}
