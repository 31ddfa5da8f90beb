//! Rightmost characteristic roots of linear retarded DDEs.
//!
//! The generator of the solution semigroup is discretised by Chebyshev
//! collocation on `[−τ_max, 0]`; its rightmost eigenvalues seed Newton's
//! method on `c(s) = det M(s)`, `M(s) = sI − A0 − Σₖ Aₖ e^{−τₖ s}`.

use alloc::{format, vec::Vec};
use core::f64::consts::PI;

use crate::controllers::{tppf_gain, tpf_gain, StaticKind};
use crate::dde_sim::{assemble_closed_loop, LinearDDE};
use crate::delay_model::DelaySystem;
use crate::linalg::{self, cabs, cexp};
use crate::parametric_are;
use crate::{CMatrix, Error, Matrix, Result, C64};

pub const DEFAULT_ORDER: usize = 32;
pub const MAX_ORDER: usize = 128;
pub const DEFAULT_COUNT: usize = 20;
/// Allowed change of `λ_max` when the discretisation order doubles.
pub const ORDER_CONSISTENCY: f64 = 1e-6;
/// Refined roots must satisfy `|c(s)| ≤ ROOT_RESIDUAL · scale(s)`.
pub const ROOT_RESIDUAL: f64 = 1e-8;
/// Bracket width at which γ bisection and golden-section searches stop.
pub const GAMMA_TOLERANCE: f64 = 1e-4;

const NEWTON_ITERATIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub s: C64,
    /// `|c(s)| / scale(s)`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    /// Sorted by descending real part.
    pub roots: Vec<Root>,
    pub order: usize,
    /// Candidates whose Newton refinement failed.
    pub dropped: usize,
}

fn char_matrix(dde: &LinearDDE, s: C64) -> CMatrix {
    let n = dde.dim();
    let mut m = CMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { s } else { C64::new(0.0, 0.0) };
        d - C64::new(dde.a0()[(i, j)], 0.0)
    });
    for term in dde.delayed() {
        let e = cexp(-s * term.tau);
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] -= e * term.matrix[(i, j)];
            }
        }
    }
    m
}

fn char_derivative_matrix(dde: &LinearDDE, s: C64) -> CMatrix {
    let n = dde.dim();
    let mut m = CMatrix::identity(n, n);
    for term in dde.delayed() {
        let e = cexp(-s * term.tau) * term.tau;
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] += e * term.matrix[(i, j)];
            }
        }
    }
    m
}

/// `c(s) = det(sI − A0 − Σₖ Aₖ e^{−τₖ s})`.
pub fn char_value(dde: &LinearDDE, s: C64) -> C64 {
    char_matrix(dde, s).lu().determinant()
}

/// Hadamard bound `Πᵢ ‖row i‖` of the entrywise magnitude of the terms
/// of `M(s)`: the size `|c(s)|` would have without cancellation.
pub fn char_scale(dde: &LinearDDE, s: C64) -> f64 {
    let n = dde.dim();
    let mut m = Matrix::from_fn(n, n, |i, j| {
        dde.a0()[(i, j)].abs() + if i == j { cabs(s) } else { 0.0 }
    });
    for term in dde.delayed() {
        let e = libm::exp(-s.re * term.tau);
        m += term.matrix.abs() * e;
    }
    (0..n).map(|i| m.row(i).norm()).product()
}

/// `c(s)/c'(s)`, from `c'/c = tr(M⁻¹ M')` or, when `M` cannot be
/// factored, from central differences of `c`.
fn newton_ratio(dde: &LinearDDE, s: C64) -> Option<C64> {
    let m = char_matrix(dde, s);
    let mp = char_derivative_matrix(dde, s);
    if let Some(x) = m.lu().solve(&mp) {
        let tr = x.trace();
        if tr.re.is_finite() && tr.im.is_finite() && cabs(tr) > 0.0 {
            return Some(C64::new(1.0, 0.0) / tr);
        }
    }
    let d = 1e-6 * (1.0 + cabs(s));
    let c = char_value(dde, s);
    let dc = (char_value(dde, s + d) - char_value(dde, s - d)) / (2.0 * d);
    if cabs(dc) > 0.0 {
        Some(c / dc)
    } else {
        None
    }
}

/// Newton refinement of a root estimate.
pub fn refine_root(dde: &LinearDDE, s0: C64) -> Option<Root> {
    let mut s = s0;
    let mut converged = false;
    for _ in 0..NEWTON_ITERATIONS {
        let step = newton_ratio(dde, s)?;
        if !(step.re.is_finite() && step.im.is_finite()) {
            return None;
        }
        s -= step;
        if cabs(step) <= 1e-14 * (1.0 + cabs(s)) {
            converged = true;
            break;
        }
    }
    let scale = char_scale(dde, s);
    let c = cabs(char_value(dde, s));
    let residual = if scale > 0.0 { c / scale } else { c };
    // A few last steps may stall at roundoff level without meeting the step
    // test; accept them on the residual alone.
    if (converged || residual <= ROOT_RESIDUAL * 1e-3) && residual <= ROOT_RESIDUAL {
        Some(Root { s, residual })
    } else {
        None
    }
}

/// Chebyshev points `cos(πj/N)` and the differentiation matrix on them.
fn chebyshev(order: usize) -> (Vec<f64>, Matrix) {
    let x: Vec<f64> = (0..=order).map(|j| libm::cos(PI * j as f64 / order as f64)).collect();
    let c = |j: usize| {
        let e = if j == 0 || j == order { 2.0 } else { 1.0 };
        if j.is_multiple_of(2) {
            e
        } else {
            -e
        }
    };
    let mut d = Matrix::zeros(order + 1, order + 1);
    for i in 0..=order {
        for j in 0..=order {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
        let row_sum: f64 = (0..=order).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -row_sum;
    }
    (x, d)
}

/// Barycentric Lagrange weights of the nodes `x` evaluated at `z`.
fn lagrange_row(x: &[f64], z: f64) -> Vec<f64> {
    let order = x.len() - 1;
    if let Some(j) = x.iter().position(|&xj| (xj - z).abs() <= 1e-14) {
        let mut e = alloc::vec![0.0; x.len()];
        e[j] = 1.0;
        return e;
    }
    let w: Vec<f64> = (0..=order)
        .map(|j| {
            let e = if j == 0 || j == order { 0.5 } else { 1.0 };
            if j % 2 == 0 {
                e
            } else {
                -e
            }
        })
        .collect();
    let terms: Vec<f64> = (0..=order).map(|j| w[j] / (z - x[j])).collect();
    let total: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / total).collect()
}

/// Collocation matrix of the generator, of size `n (N + 1)`.
pub fn generator_matrix(dde: &LinearDDE, order: usize) -> Matrix {
    let n = dde.dim();
    let tau = dde.max_delay();
    let (x, d) = chebyshev(order);
    let big = n * (order + 1);
    let mut g = Matrix::zeros(big, big);
    g.view_mut((0, 0), (n, n)).copy_from(dde.a0());
    for term in dde.delayed() {
        let z = 1.0 - 2.0 * term.tau / tau;
        for (j, l) in lagrange_row(&x, z).into_iter().enumerate() {
            if l != 0.0 {
                let mut blk = g.view_mut((0, j * n), (n, n));
                blk += &term.matrix * l;
            }
        }
    }
    let scale = 2.0 / tau;
    for i in 1..=order {
        for j in 0..=order {
            let v = d[(i, j)] * scale;
            for k in 0..n {
                g[(i * n + k, j * n + k)] = v;
            }
        }
    }
    g
}

/// The `count` rightmost characteristic roots.
pub fn rightmost_roots(dde: &LinearDDE, count: usize, order: usize) -> Result<RootSet> {
    if count == 0 {
        return Err(Error::Range("root count must be at least 1".into()));
    }
    if order < 8 {
        return Err(Error::Range(format!("discretisation order must be at least 8, got {order}")));
    }
    let mut cands = if dde.delayed().is_empty() {
        linalg::eigenvalues(dde.a0())?
    } else {
        linalg::eigenvalues(&generator_matrix(dde, order))?
    };
    cands.sort_by(|a, b| b.re.total_cmp(&a.re));
    cands.truncate(count);

    let mut roots: Vec<Root> = Vec::new();
    let mut dropped = 0;
    for c in cands {
        match refine_root(dde, c) {
            Some(r) => {
                if !roots.iter().any(|q| cabs(q.s - r.s) <= 1e-8 * (1.0 + cabs(r.s))) {
                    roots.push(r);
                }
            }
            None => dropped += 1,
        }
    }
    if roots.is_empty() {
        return Err(Error::Discretization(format!(
            "all {dropped} candidates failed to refine at order {order}; increase the order"
        )));
    }
    roots.sort_by(|a, b| b.s.re.total_cmp(&a.s.re));
    Ok(RootSet { roots, order, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abscissa {
    pub value: f64,
    pub root: C64,
    /// Order whose value agreed with its doubling.
    pub order: usize,
    pub converged: bool,
}

/// `max Re s` over the characteristic roots, with order doubling from
/// [`DEFAULT_ORDER`] until two consecutive orders agree.
pub fn lambda_max(dde: &LinearDDE) -> Result<Abscissa> {
    let top = |order: usize| -> Result<Root> {
        Ok(rightmost_roots(dde, DEFAULT_COUNT, order)?.roots[0])
    };
    if dde.delayed().is_empty() {
        let r = top(DEFAULT_ORDER)?;
        return Ok(Abscissa { value: r.s.re, root: r.s, order: DEFAULT_ORDER, converged: true });
    }
    let mut order = DEFAULT_ORDER;
    let mut cur = top(order)?;
    while 2 * order <= MAX_ORDER {
        let next = top(2 * order)?;
        if (next.s.re - cur.s.re).abs() <= ORDER_CONSISTENCY {
            return Ok(Abscissa { value: cur.s.re, root: cur.s, order, converged: true });
        }
        order *= 2;
        cur = next;
    }
    Ok(Abscissa { value: cur.s.re, root: cur.s, order, converged: false })
}

/// Closed-loop abscissa of `sys` under the static law of `kind` at `gamma`.
pub fn closed_loop_abscissa(sys: &DelaySystem, kind: StaticKind, gamma: f64) -> Result<Abscissa> {
    let b = sys.reduced_input_matrix();
    let g = parametric_are::gain(sys.a(), &b, gamma)?;
    let k = match kind {
        StaticKind::Tpf => tpf_gain(sys, &g)?,
        StaticKind::Tppf => tppf_gain(sys, &g)?,
    };
    lambda_max(&assemble_closed_loop(sys, &k.k)?)
}

/// Evaluates independent grid points; implementations may run them
/// concurrently but must return results in input order.
pub trait GridEvaluator {
    fn evaluate(&self, gammas: &[f64], f: &(dyn Fn(f64) -> Result<Abscissa> + Sync)) -> Vec<Result<Abscissa>>;
}

pub struct Sequential;

impl GridEvaluator for Sequential {
    fn evaluate(&self, gammas: &[f64], f: &(dyn Fn(f64) -> Result<Abscissa> + Sync)) -> Vec<Result<Abscissa>> {
        gammas.iter().map(|&g| f(g)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: StaticKind,
    pub gammas: Vec<f64>,
    pub lambda_max: Vec<f64>,
    /// Largest discretisation order used anywhere in the sweep.
    pub order_used: usize,
    /// First zero crossing of `λ_max` from below; `None` when the grid never
    /// crosses.
    pub gamma_sup: Option<f64>,
    pub gamma_opt: Option<f64>,
    pub lambda_max_min: Option<f64>,
    /// No grid point is stable.
    pub empty_interval: bool,
}

pub fn sweep<E: GridEvaluator + ?Sized>(
    sys: &DelaySystem,
    kind: StaticKind,
    gamma_lo: f64,
    gamma_hi: f64,
    points: usize,
    evaluator: &E,
) -> Result<SweepResult> {
    if !(gamma_lo > 0.0) || !(gamma_hi > gamma_lo) || !gamma_hi.is_finite() {
        return Err(Error::Range(format!("need 0 < gamma_lo < gamma_hi, got {gamma_lo}, {gamma_hi}")));
    }
    if points < 10 {
        return Err(Error::Range(format!("a sweep needs at least 10 points, got {points}")));
    }
    let gammas: Vec<f64> = (0..points)
        .map(|i| {
            if i + 1 == points {
                gamma_hi
            } else {
                gamma_lo + (gamma_hi - gamma_lo) * i as f64 / (points - 1) as f64
            }
        })
        .collect();
    let eval = |g: f64| closed_loop_abscissa(sys, kind, g);
    let grid = evaluator
        .evaluate(&gammas, &eval)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let lambda: Vec<f64> = grid.iter().map(|a| a.value).collect();
    let grid_order = grid.iter().map(|a| a.order).max().unwrap_or(DEFAULT_ORDER);
    let mut order_used = grid_order;
    let mut note = |a: &Abscissa| order_used = order_used.max(a.order);

    let empty_interval = lambda.iter().all(|&l| !(l < 0.0));
    let mut result = SweepResult {
        kind,
        gammas: gammas.clone(),
        lambda_max: lambda.clone(),
        order_used: grid_order,
        gamma_sup: None,
        gamma_opt: None,
        lambda_max_min: None,
        empty_interval,
    };
    if empty_interval {
        return Ok(result);
    }

    if let Some(i) = (1..points).find(|&i| lambda[i - 1] < 0.0 && lambda[i] >= 0.0) {
        let (mut lo, mut hi) = (gammas[i - 1], gammas[i]);
        while hi - lo > GAMMA_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            let a = eval(mid)?;
            note(&a);
            if a.value < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        result.gamma_sup = Some(0.5 * (lo + hi));
    }

    let imin = (0..points).min_by(|&a, &b| lambda[a].total_cmp(&lambda[b])).unwrap_or(0);
    let mut best = (gammas[imin], lambda[imin]);
    let (mut a, mut b) = (gammas[imin.saturating_sub(1)], gammas[(imin + 1).min(points - 1)]);
    let phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let fc = eval(c)?;
    let fd = eval(d)?;
    note(&fc);
    note(&fd);
    let (mut fc, mut fd) = (fc.value, fd.value);
    while b - a > GAMMA_TOLERANCE {
        for (g, v) in [(c, fc), (d, fd)] {
            if v < best.1 {
                best = (g, v);
            }
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            let r = eval(c)?;
            note(&r);
            fc = r.value;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            let r = eval(d)?;
            note(&r);
            fd = r.value;
        }
    }
    for (g, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (g, v);
        }
    }
    result.gamma_opt = Some(best.0);
    result.lambda_max_min = Some(best.1);
    result.order_used = order_used;
    Ok(result)
}
