//! Consensus of identical delayed agents over a weighted directed graph.
//!
//! Agent `i` applies `uᵢ = 𝒦 zᵢ`, `zᵢ = Σⱼ αᵢⱼ (xᵢ − xⱼ)`, with
//! `𝒦 = μ K_TPPF`. Stacking the agents gives
//! `ẋ = (I ⊗ A) x + Σₖ (L ⊗ Bₖ𝒦) x(t − τₖ)`.

use alloc::{collections::VecDeque, format, vec, vec::Vec};

use crate::controllers::{tppf_gain, StaticGain};
use crate::dde_sim::{self, History, LinearDDE, Trajectory};
use crate::delay_model::DelaySystem;
use crate::linalg::{self, cabs};
use crate::parametric_are;
use crate::{Error, Matrix, Result, C64};

/// Relative slack when comparing a requested `μ` with [`mu_bound`].
const MU_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedNetwork {
    alpha: Matrix,
    laplacian: Matrix,
    eigenvalues: Vec<C64>,
    spanning_tree: bool,
}

impl DirectedNetwork {
    pub fn agents(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn alpha(&self) -> &Matrix {
        &self.alpha
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    /// Laplacian spectrum, sorted by real then imaginary part.
    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn has_spanning_tree(&self) -> bool {
        self.spanning_tree
    }
}

pub fn build_network(alpha: Matrix) -> Result<DirectedNetwork> {
    let n = linalg::ensure_square(&alpha, "adjacency")?;
    linalg::ensure_finite(&alpha, "adjacency")?;
    for i in 0..n {
        if alpha[(i, i)] != 0.0 {
            return Err(Error::Validation(format!("adjacency has nonzero diagonal entry at {i}")));
        }
        for j in 0..n {
            if alpha[(i, j)] < 0.0 {
                return Err(Error::Validation(format!(
                    "adjacency weight ({i}, {j}) = {} is negative",
                    alpha[(i, j)]
                )));
            }
        }
    }
    let mut laplacian = -alpha.clone();
    for i in 0..n {
        laplacian[(i, i)] = (0..n).map(|j| alpha[(i, j)]).sum();
    }
    let mut eigenvalues = if n == 0 { Vec::new() } else { linalg::eigenvalues(&laplacian)? };
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let spanning_tree = spanning_tree_root(&alpha).is_some();
    Ok(DirectedNetwork {
        alpha,
        laplacian,
        eigenvalues,
        spanning_tree,
    })
}

/// A node from which every node is reachable along information flow
/// (`j → i` whenever `αᵢⱼ > 0`).
pub fn spanning_tree_root(alpha: &Matrix) -> Option<usize> {
    let n = alpha.nrows();
    (0..n).find(|&root| {
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        let mut count = 1;
        while let Some(j) = queue.pop_front() {
            for i in 0..n {
                if !seen[i] && alpha[(i, j)] > 0.0 {
                    seen[i] = true;
                    count += 1;
                    queue.push_back(i);
                }
            }
        }
        count == n
    })
}

pub fn has_spanning_tree(net: &DirectedNetwork) -> bool {
    net.spanning_tree
}

/// `max 1/Re λᵢ` over the nonzero Laplacian eigenvalues.
pub fn mu_bound(net: &DirectedNetwork) -> Result<f64> {
    if !net.spanning_tree {
        return Err(Error::Assumption(
            "the network has no directed spanning tree".into(),
        ));
    }
    if net.agents() < 2 {
        return Ok(0.0);
    }
    let mut eigs = net.eigenvalues.clone();
    eigs.sort_by(|a, b| cabs(*a).total_cmp(&cabs(*b)));
    let mut bound = 0.0_f64;
    for z in &eigs[1..] {
        if !(z.re > 0.0) {
            return Err(Error::Assumption(format!(
                "Laplacian eigenvalue {z} has non-positive real part"
            )));
        }
        bound = bound.max(1.0 / z.re);
    }
    Ok(bound)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub mu: f64,
    /// `μ K_TPPF`.
    pub gain: Matrix,
    pub tppf: StaticGain,
}

pub fn build_protocol(sys: &DelaySystem, net: &DirectedNetwork, gamma: f64, mu: f64) -> Result<Protocol> {
    let bound = mu_bound(net)?;
    if !mu.is_finite() || mu < bound * (1.0 - MU_SLACK) {
        return Err(Error::Validation(format!("mu = {mu} is below the network bound {bound}")));
    }
    let g = parametric_are::gain(sys.a(), &sys.reduced_input_matrix(), gamma)?;
    let tppf = tppf_gain(sys, &g)?;
    Ok(Protocol {
        mu,
        gain: &tppf.k * mu,
        tppf,
    })
}

/// The stacked `Nn`-dimensional closed loop under the gain `k`.
pub fn network_dde(sys: &DelaySystem, net: &DirectedNetwork, k: &Matrix) -> Result<LinearDDE> {
    let n_agents = net.agents();
    let eye = Matrix::identity(n_agents, n_agents);
    let terms = sys
        .channels()
        .iter()
        .map(|c| (net.laplacian().kronecker(&(&c.b * k)), c.tau))
        .collect();
    LinearDDE::new(eye.kronecker(sys.a()), terms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusRun {
    pub agents: usize,
    pub state_dim: usize,
    pub trajectory: Trajectory,
    /// `d(t) = maxᵢ ‖xᵢ(t) − x₁(t)‖`.
    pub disagreement: Vec<f64>,
    /// `‖x₁(t)‖`.
    pub leader_norm: Vec<f64>,
}

impl ConsensusRun {
    pub fn times(&self) -> &[f64] {
        &self.trajectory.times
    }

    pub fn agent_state(&self, sample: usize, agent: usize) -> &[f64] {
        let n = self.state_dim;
        &self.trajectory.states[sample][agent * n..(agent + 1) * n]
    }
}

fn run_from(trajectory: Trajectory, agents: usize, n: usize) -> ConsensusRun {
    let dist = |a: &[f64], b: &[f64]| libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum());
    let mut disagreement = Vec::with_capacity(trajectory.len());
    let mut leader_norm = Vec::with_capacity(trajectory.len());
    for x in &trajectory.states {
        let lead = &x[..n];
        disagreement.push((1..agents).map(|i| dist(&x[i * n..(i + 1) * n], lead)).fold(0.0, f64::max));
        leader_norm.push(libm::sqrt(lead.iter().map(|v| v * v).sum()));
    }
    ConsensusRun {
        agents,
        state_dim: n,
        trajectory,
        disagreement,
        leader_norm,
    }
}

/// Simulates the network from constant initial histories `xᵢ(θ) = xᵢ(0)`.
pub fn simulate_network(
    sys: &DelaySystem,
    net: &DirectedNetwork,
    gamma: f64,
    mu: f64,
    initial: &[Vec<f64>],
    horizon: f64,
    h: f64,
) -> Result<ConsensusRun> {
    let protocol = build_protocol(sys, net, gamma, mu)?;
    simulate_with_gain(sys, net, &protocol.gain, initial, horizon, h)
}

/// As [`simulate_network`] with an explicit per-agent gain.
pub fn simulate_with_gain(
    sys: &DelaySystem,
    net: &DirectedNetwork,
    k: &Matrix,
    initial: &[Vec<f64>],
    horizon: f64,
    h: f64,
) -> Result<ConsensusRun> {
    let (agents, n) = (net.agents(), sys.state_dim());
    if initial.len() != agents || initial.iter().any(|x| x.len() != n) {
        return Err(Error::Dimension(format!(
            "need {agents} initial states of length {n}"
        )));
    }
    let dde = network_dde(sys, net, k)?;
    let x0: Vec<f64> = initial.concat();
    let init = History::constant(&x0, -dde.max_delay(), 0.0)?;
    Ok(run_from(dde_sim::simulate(&dde, &init, horizon, h)?, agents, n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    /// Largest eigenvalue cluster of `A`: an upper bound on the algebraic
    /// multiplicity that fixes the polynomial degree `N* − 1`.
    pub n_star: usize,
    /// `sup ‖x₁(t)‖ / (1 + t^{N*−1})` over the first half of the run.
    pub k: f64,
    /// The same supremum over the second half.
    pub tail_ratio: f64,
    /// `tail_ratio ≤ GROWTH_SLACK · k`.
    pub holds: bool,
}

/// Allowed growth of the envelope constant between the two halves.
pub const GROWTH_SLACK: f64 = 1.25;

/// Checks `‖x₁(t)‖ ≤ k (1 + t^{N*−1})`: `k` is fitted on the first half of
/// the horizon and must still bound the second.
pub fn reference_growth_check(run: &ConsensusRun, sys: &DelaySystem) -> Result<GrowthReport> {
    let d0 = run.disagreement.first().copied().unwrap_or(0.0);
    let d1 = run.disagreement.last().copied().unwrap_or(0.0);
    if !(d1 * 10.0 <= d0) {
        return Err(Error::Validation(format!(
            "consensus not reached: disagreement went from {d0:e} to {d1:e}"
        )));
    }
    let a = sys.a();
    let eigs = linalg::eigenvalues(a)?;
    let clusters = linalg::cluster_eigenvalues(&eigs, 1e-6 * (1.0 + a.norm()));
    let n_star = clusters.iter().map(|c| c.1).max().unwrap_or(1);
    let deg = (n_star - 1) as i32;
    let t_end = run.times().last().copied().unwrap_or(0.0);
    let (mut head, mut tail) = (0.0_f64, 0.0_f64);
    for (t, x) in run.times().iter().zip(&run.leader_norm) {
        let r = x / (1.0 + libm::pow(*t, f64::from(deg)));
        if *t <= t_end / 2.0 {
            head = head.max(r);
        } else {
            tail = tail.max(r);
        }
    }
    Ok(GrowthReport {
        n_star,
        k: head,
        tail_ratio: tail,
        holds: tail <= GROWTH_SLACK * head,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{oscillator_plant, six_agent_adjacency};

    #[test]
    fn benchmark_network() {
        let net = build_network(six_agent_adjacency()).unwrap();
        assert!(net.has_spanning_tree());
        let want = [0.0, 1.0, 1.0, 2.0, 2.0, 3.0];
        for (z, w) in net.eigenvalues().iter().zip(want) {
            assert!((z.re - w).abs() < 1e-8 && z.im.abs() < 1e-8, "{z}");
        }
        assert!((mu_bound(&net).unwrap() - 1.0).abs() < 1e-8);
        for i in 0..6 {
            let s: f64 = net.laplacian().row(i).iter().sum();
            assert!(s.abs() <= 1e-12 * 2.0);
        }
    }

    #[test]
    fn graph_shapes() {
        let empty = build_network(Matrix::zeros(3, 3)).unwrap();
        assert!(!empty.has_spanning_tree());
        assert!(matches!(mu_bound(&empty), Err(Error::Assumption(_))));

        let complete = build_network(Matrix::from_fn(3, 3, |i, j| f64::from(u8::from(i != j)))).unwrap();
        assert!((mu_bound(&complete).unwrap() - 1.0 / 3.0).abs() < 1e-12);

        // Chain 0 → 1 → 2: agent k listens to agent k − 1.
        let mut chain = Matrix::zeros(4, 4);
        for k in 1..4 {
            chain[(k, k - 1)] = 1.0;
        }
        assert_eq!(spanning_tree_root(&chain), Some(0));

        let mut two_cycles = Matrix::zeros(6, 6);
        for c in 0..2 {
            for k in 0..3 {
                two_cycles[(3 * c + k, 3 * c + (k + 1) % 3)] = 1.0;
            }
        }
        assert_eq!(spanning_tree_root(&two_cycles), None);

        let mut bad = Matrix::zeros(2, 2);
        bad[(0, 1)] = -1.0;
        assert!(matches!(build_network(bad), Err(Error::Validation(_))));
    }

    #[test]
    fn protocol_scaling_and_guard() {
        let sys = oscillator_plant();
        let net = build_network(six_agent_adjacency()).unwrap();
        let one = build_protocol(&sys, &net, 0.1, 1.0).unwrap();
        assert_eq!(one.gain, one.tppf.k);
        let two = build_protocol(&sys, &net, 0.1, 2.0).unwrap();
        assert_eq!(two.gain, &one.gain * 2.0);
        assert!(matches!(build_protocol(&sys, &net, 0.1, 0.5), Err(Error::Validation(_))));
    }

    #[test]
    fn identical_agents_never_disagree() {
        let sys = oscillator_plant();
        let net = build_network(six_agent_adjacency()).unwrap();
        let x = vec![0.3, -1.0, 0.5, 2.0];
        let run = simulate_network(&sys, &net, 0.1, 1.0, &vec![x; 6], 20.0, 0.05).unwrap();
        assert!(run.disagreement.iter().all(|&d| d <= 1e-10));
    }
}
