//! Fixed-step simulation of linear retarded DDEs, of delayed plants under
//! history-dependent control, and of the integral delay system.

mod history;
mod ids;

use alloc::{format, vec, vec::Vec};

use nalgebra::DVector;

pub use history::History;
pub use ids::simulate_ids;

use crate::controllers::HistoryController;
use crate::delay_model::DelaySystem;
use crate::linalg;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub matrix: Matrix,
    pub tau: f64,
}

/// `ẋ(t) = A0 x(t) + Σₖ Aₖ x(t − τₖ)` with `0 < τ_1 < τ_2 < …`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDDE {
    a0: Matrix,
    delayed: Vec<DelayTerm>,
}

impl LinearDDE {
    /// Builds the equation from arbitrary `(matrix, delay)` terms: zero
    /// delays fold into `A0`, equal delays are summed, exactly zero
    /// matrices are dropped.
    pub fn new(a0: Matrix, terms: Vec<(Matrix, f64)>) -> Result<Self> {
        let n = linalg::ensure_square(&a0, "A0")?;
        linalg::ensure_finite(&a0, "A0")?;
        let mut a0 = a0;
        let mut delayed: Vec<DelayTerm> = Vec::new();
        for (m, tau) in terms {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Dimension(format!(
                    "delayed matrix is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            linalg::ensure_finite(&m, "delayed matrix")?;
            if !tau.is_finite() || tau < 0.0 {
                return Err(Error::Range(format!("delay must be finite and non-negative, got {tau}")));
            }
            // Equal delays are summed among themselves first so that
            // splitting a term never changes the result by rounding.
            if let Some(t) = delayed.iter_mut().find(|t| t.tau == tau) {
                t.matrix += m;
            } else {
                delayed.push(DelayTerm { matrix: m, tau });
            }
        }
        if let Some(i) = delayed.iter().position(|t| t.tau == 0.0) {
            a0 += delayed.swap_remove(i).matrix;
        }
        delayed.retain(|t| t.matrix.iter().any(|&v| v != 0.0));
        delayed.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        Ok(Self { a0, delayed })
    }

    pub fn ode(a0: Matrix) -> Result<Self> {
        Self::new(a0, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    pub fn a0(&self) -> &Matrix {
        &self.a0
    }

    pub fn delayed(&self) -> &[DelayTerm] {
        &self.delayed
    }

    pub fn max_delay(&self) -> f64 {
        self.delayed.last().map_or(0.0, |t| t.tau)
    }

    pub fn min_delay(&self) -> Option<f64> {
        self.delayed.first().map(|t| t.tau)
    }
}

/// Closed loop of `sys` under `u = K x`.
pub fn assemble_closed_loop(sys: &DelaySystem, k: &Matrix) -> Result<LinearDDE> {
    if k.nrows() != sys.input_dim() || k.ncols() != sys.state_dim() {
        return Err(Error::Dimension(format!(
            "gain is {}x{}, system needs {}x{}",
            k.nrows(),
            k.ncols(),
            sys.input_dim(),
            sys.state_dim()
        )));
    }
    let terms = sys.channels().iter().map(|c| (&c.b * k, c.tau)).collect();
    LinearDDE::new(sys.a().clone(), terms)
}

/// Sampled solution on the uniform grid `tₖ = k h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `ẋ(tₖ)`; absent for the integral delay system.
    pub derivatives: Option<Vec<Vec<f64>>>,
    /// Applied control, when a controller is attached.
    pub inputs: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.as_ref().and_then(|u| u.first()).map_or(0, Vec::len)
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|x| libm::sqrt(x.iter().map(|v| v * v).sum()))
            .collect()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Last two thirds of the horizon.
    pub fn default_window(&self) -> (f64, f64) {
        let t = self.horizon();
        (t / 3.0, t)
    }
}

/// Least-squares slope of `log‖x(t)‖` over samples with `t ∈ [t0, t1]`.
pub fn decay_rate(traj: &Trajectory, window: (f64, f64)) -> Result<f64> {
    let (t0, t1) = window;
    let mut pts = Vec::new();
    for (t, nrm) in traj.times.iter().zip(traj.norms()) {
        if *t < t0 || *t > t1 {
            continue;
        }
        if !(nrm > f64::MIN_POSITIVE) || !nrm.is_finite() {
            return Err(Error::Fit(format!("state norm {nrm:e} at t = {t} cannot be log-fitted")));
        }
        pts.push((*t, libm::log(nrm)));
    }
    if pts.len() < 2 {
        return Err(Error::Fit(format!(
            "window [{t0}, {t1}] holds {} samples, need at least 2",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    Ok(sxy / sxx)
}

/// `min(τ_min / 20, 0.01)`.
pub fn default_step(min_delay: Option<f64>) -> f64 {
    min_delay.map_or(0.01, |d| (d / 20.0).min(0.01))
}

fn check_step(h: f64, horizon: f64, min_delay: Option<f64>) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Step(format!("step must be positive, got {h}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Range(format!("horizon must be positive, got {horizon}")));
    }
    if let Some(d) = min_delay {
        if h > d / 4.0 {
            return Err(Error::Step(format!(
                "step {h} exceeds a quarter of the smallest delay {d}; use h <= {}",
                d / 4.0
            )));
        }
    }
    Ok(libm::ceil(horizon / h - 1e-9) as usize)
}

fn check_initial(init: &History, dim: usize, back: f64) -> Result<()> {
    if init.dim() != dim {
        return Err(Error::Dimension(format!(
            "initial history has dimension {}, expected {dim}",
            init.dim()
        )));
    }
    init.require_span(-back, 0.0)?;
    if init.t_max() > 1e-10 {
        return Err(Error::Validation(format!(
            "initial history must end at t = 0, ends at {}",
            init.t_max()
        )));
    }
    Ok(())
}

/// Points strictly inside `(t, t + h)` where the right-hand side may lose
/// smoothness.
fn split_points(t: f64, h: f64, breaks: &[f64]) -> Vec<f64> {
    let eps = 1e-9 * h;
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > t + eps && b < t + h - eps)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// One RK4 step. The right-hand side gets a flag asking for left limits of
/// stored signals; it is set on the last stage when the step ends at a
/// breakpoint.
fn rk4<F>(f: &mut F, t: f64, x: &DVector<f64>, h: f64, ends_at_break: bool) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>, bool) -> Result<DVector<f64>>,
{
    let k1 = f(t, x, false)?;
    let k2 = f(t + h / 2.0, &(x + &k1 * (h / 2.0)), false)?;
    let k3 = f(t + h / 2.0, &(x + &k2 * (h / 2.0)), false)?;
    let k4 = f(t + h, &(x + &k3 * h), ends_at_break)?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn dde_rhs(dde: &LinearDDE, hist: &History, buf: &mut DVector<f64>, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    let mut d = dde.a0() * x;
    for term in dde.delayed() {
        hist.eval_into(t - term.tau, buf.as_mut_slice())?;
        d.gemv(1.0, &term.matrix, buf, 1.0);
    }
    Ok(d)
}

/// Classic RK4 on the DDE, delayed states read from the Hermite history of
/// the solution computed so far. Steps that straddle a delay (where the
/// initial kink at `t = 0` resurfaces) are split there.
pub fn simulate(dde: &LinearDDE, init: &History, horizon: f64, h: f64) -> Result<Trajectory> {
    let n = dde.dim();
    let steps = check_step(h, horizon, dde.min_delay())?;
    check_initial(init, n, dde.max_delay())?;
    let breaks: Vec<f64> = dde.delayed().iter().map(|t| t.tau).collect();

    let mut hist = init.clone();
    let mut buf = DVector::zeros(n);
    let mut x = DVector::from_vec(init.eval(0.0)?);
    let dx = dde_rhs(dde, &hist, &mut buf, 0.0, &x)?;
    hist.push(0.0, x.as_slice(), dx.as_slice())?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x.as_slice().to_vec()],
        derivatives: Some(vec![dx.as_slice().to_vec()]),
        inputs: None,
    };
    for k in 0..steps {
        let t = k as f64 * h;
        let t1 = (k + 1) as f64 * h;
        let mut a = t;
        let mut ends = split_points(t, h, &breaks);
        ends.push(t1);
        let mut dx = DVector::zeros(n);
        for b in ends {
            x = rk4(&mut |s, y, _| dde_rhs(dde, &hist, &mut buf, s, y), a, &x, b - a, false)?;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("simulated state"));
            }
            dx = dde_rhs(dde, &hist, &mut buf, b, &x)?;
            hist.push(b, x.as_slice(), dx.as_slice())?;
            a = b;
        }
        traj.times.push(t1);
        traj.states.push(x.as_slice().to_vec());
        if let Some(d) = traj.derivatives.as_mut() {
            d.push(dx.as_slice().to_vec());
        }
    }
    Ok(traj)
}

fn plant_rhs(
    sys: &DelaySystem,
    input: &History,
    buf: &mut DVector<f64>,
    t: f64,
    x: &DVector<f64>,
    left: bool,
) -> Result<DVector<f64>> {
    let mut d = sys.a() * x;
    for ch in sys.channels() {
        if left {
            input.eval_left_into(t - ch.tau, buf.as_mut_slice())?;
        } else {
            input.eval_into(t - ch.tau, buf.as_mut_slice())?;
        }
        d.gemv(1.0, &ch.b, buf, 1.0);
    }
    Ok(d)
}

fn plant_breaks(sys: &DelaySystem) -> Vec<f64> {
    sys.channels().iter().map(|c| c.tau).filter(|&t| t > 0.0).collect()
}

/// `ẋ = A x + Σᵢ Bᵢ u(t − τᵢ)` with a prescribed input signal covering
/// `[−τ_max, T]`.
pub fn simulate_driven(
    sys: &DelaySystem,
    x0: &[f64],
    input: &History,
    horizon: f64,
    h: f64,
) -> Result<Trajectory> {
    let n = sys.state_dim();
    if x0.len() != n || input.dim() != sys.input_dim() {
        return Err(Error::Dimension(format!(
            "driven run needs x0 of length {n} and an input of dimension {}",
            sys.input_dim()
        )));
    }
    let steps = check_step(h, horizon, None)?;
    input.require_span(-sys.max_delay(), steps as f64 * h)?;
    let breaks = plant_breaks(sys);
    let mut buf = DVector::zeros(sys.input_dim());
    let mut x = DVector::from_column_slice(x0);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        derivatives: Some(vec![plant_rhs(sys, input, &mut buf, 0.0, &x, false)?.as_slice().to_vec()]),
        inputs: None,
    };
    for k in 0..steps {
        let t = k as f64 * h;
        let t1 = (k + 1) as f64 * h;
        let mut a = t;
        let mut ends = split_points(t, h, &breaks);
        ends.push(t1);
        for b in ends {
            x = rk4(&mut |s, y, l| plant_rhs(sys, input, &mut buf, s, y, l), a, &x, b - a, b < t1)?;
            a = b;
        }
        traj.times.push(t1);
        traj.states.push(x.as_slice().to_vec());
        let d = plant_rhs(sys, input, &mut buf, t1, &x, false)?;
        if let Some(ds) = traj.derivatives.as_mut() {
            ds.push(d.as_slice().to_vec());
        }
    }
    Ok(traj)
}

/// Fixed-point sweeps per step when the control feeds back undelayed.
const CORRECTOR_PASSES: usize = 3;

/// Rewrites the slopes of the last two input nodes from finite
/// differences over the solution nodes (indices `first..`).
fn refresh_input_slopes(u: &mut History, first: usize, h: f64) {
    let last = u.len() - 1;
    let m = u.dim();
    let lo = last.saturating_sub(1).max(first);
    for k in lo..=last {
        let mut s = vec![0.0; m];
        let have = last - first + 1;
        for i in 0..m {
            let v = |j: usize| u.node_value(j)[i];
            s[i] = if have < 2 {
                0.0
            } else if k == first {
                if have >= 3 {
                    (-3.0 * v(k) + 4.0 * v(k + 1) - v(k + 2)) / (2.0 * h)
                } else {
                    (v(k + 1) - v(k)) / h
                }
            } else if k == last {
                if k >= first + 2 {
                    (3.0 * v(k) - 4.0 * v(k - 1) + v(k - 2)) / (2.0 * h)
                } else {
                    (v(k) - v(k - 1)) / h
                }
            } else {
                (v(k + 1) - v(k - 1)) / (2.0 * h)
            };
        }
        u.set_node(k, None, Some(&s));
    }
}

/// Plant under a history-dependent law. Returns the state trajectory with
/// the applied inputs, together with the full input history (pre-history
/// followed by the computed control).
pub fn simulate_dynamic(
    sys: &DelaySystem,
    hc: &HistoryController,
    x0: &[f64],
    init_input: &History,
    horizon: f64,
    h: f64,
) -> Result<(Trajectory, History)> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    if x0.len() != n {
        return Err(Error::Dimension(format!("x0 has length {}, expected {n}", x0.len())));
    }
    let steps = check_step(h, horizon, sys.min_positive_delay())?;
    check_initial(init_input, m, sys.max_delay().max(hc.required_span()))?;

    let mut u_hist = init_input.clone();
    let mut x = DVector::from_column_slice(x0);
    let u0 = hc.evaluate_at(&x, &u_hist, 0.0)?;
    let first = u_hist.len();
    u_hist.push(0.0, u0.as_slice(), &vec![0.0; m])?;

    let breaks = plant_breaks(sys);
    let mut buf = DVector::zeros(m);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        derivatives: Some(vec![plant_rhs(sys, &u_hist, &mut buf, 0.0, &x, false)?.as_slice().to_vec()]),
        inputs: Some(vec![u0.as_slice().to_vec()]),
    };
    for k in 0..steps {
        let t = k as f64 * h;
        let t1 = (k + 1) as f64 * h;
        let last = u_hist.len() - 1;
        let guess: Vec<f64> = if last > first {
            (0..m)
                .map(|i| 2.0 * u_hist.node_value(last)[i] - u_hist.node_value(last - 1)[i])
                .collect()
        } else {
            u_hist.node_value(last).to_vec()
        };
        u_hist.push(t1, &guess, &vec![0.0; m])?;
        refresh_input_slopes(&mut u_hist, first, h);

        let mut ends = split_points(t, h, &breaks);
        ends.push(t1);
        let mut x1 = x.clone();
        let mut u1 = DVector::from_vec(guess);
        for _ in 0..CORRECTOR_PASSES {
            x1 = x.clone();
            let mut a = t;
            for &b in &ends {
                x1 = rk4(&mut |s, y, l| plant_rhs(sys, &u_hist, &mut buf, s, y, l), a, &x1, b - a, b < t1)?;
                a = b;
            }
            u1 = hc.evaluate_at(&x1, &u_hist, t1)?;
            let idx = u_hist.len() - 1;
            u_hist.set_node(idx, Some(u1.as_slice()), None);
            refresh_input_slopes(&mut u_hist, first, h);
        }
        if x1.iter().chain(u1.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("closed-loop state"));
        }
        x = x1;
        traj.times.push(t1);
        traj.states.push(x.as_slice().to_vec());
        let d = plant_rhs(sys, &u_hist, &mut buf, t1, &x, false)?;
        if let Some(ds) = traj.derivatives.as_mut() {
            ds.push(d.as_slice().to_vec());
        }
        if let Some(us) = traj.inputs.as_mut() {
            us.push(u1.as_slice().to_vec());
        }
    }
    Ok((traj, u_hist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay_model::Channel;

    fn scalar_delay() -> LinearDDE {
        LinearDDE::new(Matrix::zeros(1, 1), vec![(Matrix::from_element(1, 1, -1.0), 1.0)]).unwrap()
    }

    #[test]
    fn ode_matches_matrix_exponential() {
        let a = Matrix::from_row_slice(2, 2, &[-0.3, 1.0, -1.0, -0.3]);
        let dde = LinearDDE::ode(a.clone()).unwrap();
        let init = History::constant(&[1.0, 0.5], 0.0, 0.0).unwrap();
        let traj = simulate(&dde, &init, 5.0, 1e-2).unwrap();
        let want = linalg::expm(&a, 5.0).unwrap() * DVector::from_column_slice(&[1.0, 0.5]);
        let got = DVector::from_column_slice(traj.final_state());
        assert!((got - &want).norm() <= 1e-6 * want.norm());
    }

    #[test]
    fn method_of_steps_first_interval() {
        let init = History::constant(&[1.0], -1.0, 0.0).unwrap();
        let traj = simulate(&scalar_delay(), &init, 1.0, 0.01).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.states) {
            assert!((x[0] - (1.0 - t)).abs() < 1e-8);
        }
        assert!(traj.final_state()[0].abs() < 1e-8);
    }

    #[test]
    fn second_interval_is_the_quadratic_piece() {
        // x(t) = 1 − t + (t − 1)²/2 on [1, 2].
        let init = History::constant(&[1.0], -1.0, 0.0).unwrap();
        let traj = simulate(&scalar_delay(), &init, 2.0, 0.01).unwrap();
        assert!((traj.final_state()[0] + 0.5).abs() < 1e-8);
    }

    #[test]
    fn step_and_span_errors() {
        let init = History::constant(&[1.0], -1.0, 0.0).unwrap();
        assert!(matches!(simulate(&scalar_delay(), &init, 1.0, 0.3), Err(Error::Step(_))));
        let short = History::constant(&[1.0], -0.5, 0.0).unwrap();
        assert!(matches!(simulate(&scalar_delay(), &short, 1.0, 0.01), Err(Error::History { .. })));
    }

    #[test]
    fn assembly_merges_and_prunes() {
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let sys = DelaySystem::new(
            a.clone(),
            vec![
                Channel { b: b.clone(), tau: 0.0 },
                Channel { b: b.clone() * 0.5, tau: 0.7 },
                Channel { b: b.clone() * 0.5, tau: 0.7 },
            ],
        )
        .unwrap();
        let k = Matrix::from_row_slice(1, 2, &[-1.0, -2.0]);
        let dde = assemble_closed_loop(&sys, &k).unwrap();
        assert_eq!(dde.delayed().len(), 1);
        assert_eq!(dde.delayed()[0].matrix, &b * &k);
        assert_eq!(*dde.a0(), &a + &b * &k);
        let open = assemble_closed_loop(&sys, &Matrix::zeros(1, 2)).unwrap();
        assert!(open.delayed().is_empty());
        assert_eq!(*open.a0(), a);
    }

    #[test]
    fn decay_rate_of_exact_exponential() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let traj = Trajectory {
            states: times.iter().map(|t| vec![3.0 * libm::exp(-0.5 * t), -libm::exp(-0.5 * t)]).collect(),
            times,
            derivatives: None,
            inputs: None,
        };
        assert!((decay_rate(&traj, (0.0, 10.0)).unwrap() + 0.5).abs() < 1e-12);
        let flat = Trajectory {
            states: vec![vec![2.0]; 11],
            times: (0..=10).map(f64::from).collect(),
            derivatives: None,
            inputs: None,
        };
        assert!(decay_rate(&flat, (0.0, 10.0)).unwrap().abs() < 1e-15);
        let dead = Trajectory { states: vec![vec![0.0]; 3], ..flat };
        assert!(matches!(decay_rate(&dead, (0.0, 10.0)), Err(Error::Fit(_))));
    }
}
