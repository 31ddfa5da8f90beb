//! One function per subcommand. Each returns the process exit code on
//! success; failures carry their own code through [`CliError`].

use std::path::{Path, PathBuf};

use delay_horizon::consensus::{self, build_network, mu_bound, reference_growth_check};
use delay_horizon::controllers::{tpf_gain, tppf_gain, HistoryController, StaticKind};
use delay_horizon::dde_sim::{
    assemble_closed_loop, decay_rate, default_step, simulate, simulate_dynamic, History, Trajectory,
};
use delay_horizon::delay_model::{AssumptionReport, DelaySystem};
use delay_horizon::parametric_are::{self, commutation_residual};
use delay_horizon::reference::{oscillator_plant, six_agent_adjacency};
use delay_horizon::spectrum;
use delay_horizon::{Matrix, C64};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::acceptance::{self, report_value, Suite, CRITERIA};
use crate::error::{CliError, EXIT_ASSUMPTION, EXIT_OK, EXIT_VERIFY};
use crate::formats::{self, ensure_dir, matrix_value, num, object, opt_num, vector_value, write_csv, write_json};
use crate::pool::WorkerPool;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Tpf,
    Tppf,
    Ppf,
    Mr,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Tpf => "tpf",
            Kind::Tppf => "tppf",
            Kind::Ppf => "ppf",
            Kind::Mr => "mr",
        }
    }

    fn static_kind(self) -> Option<StaticKind> {
        match self {
            Kind::Tpf => Some(StaticKind::Tpf),
            Kind::Tppf => Some(StaticKind::Tppf),
            Kind::Ppf | Kind::Mr => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl std::str::FromStr for GammaRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:n, got {s:?}"));
        }
        let f = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        Ok(Self {
            lo: f(parts[0])?,
            hi: f(parts[1])?,
            points: parts[2].trim().parse().map_err(|e| format!("{:?}: {e}", parts[2]))?,
        })
    }
}

/// Parsed invocation shared by every subcommand; each command reads the
/// fields it needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: Option<PathBuf>,
    pub network: Option<PathBuf>,
    pub gamma: Option<f64>,
    pub gamma_range: Option<GammaRange>,
    pub kind: Option<Kind>,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub mu: Option<f64>,
    pub out: PathBuf,
    pub workers: usize,
    pub x0: Option<Vec<f64>>,
    pub seed: u64,
    pub criteria: Option<Vec<u8>>,
    pub corrupt_gain: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: None,
            network: None,
            gamma: None,
            gamma_range: None,
            kind: None,
            horizon: None,
            step: None,
            mu: None,
            out: PathBuf::from("out"),
            workers: WorkerPool::default_workers(),
            x0: None,
            seed: 9,
            criteria: None,
            corrupt_gain: false,
        }
    }
}

pub const DEFAULT_RANGE: GammaRange = GammaRange {
    lo: 0.02,
    hi: 1.3,
    points: 40,
};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !(x > 0.0) || !x.is_finite() => Err(usage(format!("--{name} must be positive, got {x}"))),
        other => Ok(other),
    }
}

fn require_gamma(cfg: &RunConfig) -> Result<f64, CliError> {
    positive("gamma", cfg.gamma)?.ok_or_else(|| usage("--gamma is required"))
}

/// The system file, or the built-in oscillator benchmark.
fn system(cfg: &RunConfig) -> Result<(DelaySystem, Vec<usize>), CliError> {
    match &cfg.system {
        Some(p) => formats::load_system(p),
        None => {
            let sys = oscillator_plant();
            let order = (0..sys.channels().len()).collect();
            Ok((sys, order))
        }
    }
}

fn out_file(cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    Ok(ensure_dir(&cfg.out)?.join(name))
}

fn complex_list(z: &[C64]) -> Value {
    Value::Array(z.iter().map(|z| Value::Array(vec![num(z.re), num(z.im)])).collect())
}

pub fn report_json(r: &AssumptionReport, order: &[usize]) -> Value {
    object(vec![
        ("reduced_B", matrix_value(&r.reduced_b)),
        ("total_tau", num(r.total_tau)),
        ("stabilizable", Value::from(r.stabilizable)),
        ("controllable", Value::from(r.controllable)),
        ("spectrum_on_axis", Value::from(r.spectrum_on_axis)),
        ("admits_low_gain_design", Value::from(r.admits_low_gain_design())),
        ("eigenvalues_of_A", complex_list(&r.eigenvalues_of_a)),
        ("max_real_part", num(r.max_real_part)),
        ("channel_order", Value::from(order.to_vec())),
    ])
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values serialize")
}

/// Prints the assumption report; exit 2 when the low-gain hypothesis fails.
pub fn cmd_check(cfg: &RunConfig) -> Result<u8, CliError> {
    let (sys, order) = system(cfg)?;
    let report = sys.check_assumptions()?;
    println!("{}", pretty(&report_json(&report, &order)));
    Ok(if report.admits_low_gain_design() { EXIT_OK } else { EXIT_ASSUMPTION })
}

fn admitted(sys: &DelaySystem, order: &[usize]) -> Result<(), CliError> {
    let report = sys.check_assumptions()?;
    if report.admits_low_gain_design() {
        return Ok(());
    }
    eprintln!("{}", pretty(&report_json(&report, order)));
    Err(CliError::Assumption(format!(
        "low-gain design needs a controllable reduced pair and an imaginary-axis spectrum \
         (controllable={}, spectrum_on_axis={})",
        report.controllable, report.spectrum_on_axis
    )))
}

/// Writes `gain.json`.
pub fn cmd_design(cfg: &RunConfig) -> Result<u8, CliError> {
    let gamma = require_gamma(cfg)?;
    let (sys, order) = system(cfg)?;
    admitted(&sys, &order)?;
    let b = sys.reduced_input_matrix();
    let design = parametric_are::gain(sys.a(), &b, gamma)?;
    let tpf = tpf_gain(&sys, &design)?;
    let tppf = tppf_gain(&sys, &design)?;
    let residuals = object(vec![
        ("riccati", num(design.are_residual(sys.a()))),
        ("lyapunov", num(design.lyapunov_residual(sys.a()))),
        ("inverse", num(design.inverse_residual())),
        ("trace_identity_gap", num(design.trace_identity_gap())),
        ("psd_margin", num(design.psd_margin())),
        ("commutation_at_tau", num(commutation_residual(&design, sys.a(), sys.total_delay())?)),
    ]);
    let value = object(vec![
        ("gamma", num(gamma)),
        ("reduced_B", matrix_value(&b)),
        ("F", matrix_value(&design.f)),
        ("K_TPF", matrix_value(&tpf.k)),
        ("K_TPPF", matrix_value(&tppf.k)),
        ("W", matrix_value(&design.w)),
        ("P", matrix_value(&design.p)),
        ("residuals", residuals),
        ("channel_order", Value::from(order)),
    ]);
    let path = out_file(cfg, "gain.json")?;
    write_json(&path, &value)?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

/// Writes `sweep_<kind>.csv` and `sweep_<kind>.json` for one or both static kinds.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<u8, CliError> {
    let kinds = match cfg.kind {
        None => vec![Kind::Tpf, Kind::Tppf],
        Some(k) if k.static_kind().is_some() => vec![k],
        Some(k) => return Err(usage(format!("sweep supports tpf and tppf, not {}", k.name()))),
    };
    let range = cfg.gamma_range.unwrap_or(DEFAULT_RANGE);
    let (sys, order) = system(cfg)?;
    admitted(&sys, &order)?;
    let pool = WorkerPool::new(cfg.workers);
    for kind in kinds {
        let r = spectrum::sweep(
            &sys,
            kind.static_kind().expect("static kind"),
            range.lo,
            range.hi,
            range.points,
            &pool,
        )?;
        let csv = out_file(cfg, &format!("sweep_{}.csv", kind.name()))?;
        write_csv(
            &csv,
            &["gamma".to_string(), "lambda_max".to_string()],
            r.gammas.iter().zip(&r.lambda_max).map(|(g, l)| vec![*g, *l]),
        )?;
        let summary = object(vec![
            ("kind", Value::from(kind.name())),
            ("gamma_sup", opt_num(r.gamma_sup)),
            ("gamma_opt", opt_num(r.gamma_opt)),
            ("lambda_max_min", opt_num(r.lambda_max_min)),
            ("N_used", Value::from(r.order_used)),
            ("empty_interval", Value::from(r.empty_interval)),
        ]);
        write_json(&out_file(cfg, &format!("sweep_{}.json", kind.name()))?, &summary)?;
        println!(
            "{}: gamma_sup={} gamma_opt={} lambda_max_min={}{}",
            kind.name(),
            show(r.gamma_sup),
            show(r.gamma_opt),
            show(r.lambda_max_min),
            if r.empty_interval { " (no stable gamma in range)" } else { "" }
        );
    }
    Ok(EXIT_OK)
}

fn show(v: Option<f64>) -> String {
    v.map_or("none".into(), |x| format!("{x:.6}"))
}

fn initial_state(cfg: &RunConfig, n: usize) -> Result<Vec<f64>, CliError> {
    match &cfg.x0 {
        None => Ok(vec![1.0; n]),
        Some(v) if v.len() == n => Ok(v.clone()),
        Some(v) => Err(usage(format!("--x0 has {} entries, state dimension is {n}", v.len()))),
    }
}

fn step_for(cfg: &RunConfig, min_delay: Option<f64>) -> Result<f64, CliError> {
    Ok(positive("step", cfg.step)?.unwrap_or_else(|| default_step(min_delay)))
}

/// Writes `trajectory_<kind>.csv` and `trajectory_<kind>.json`.
///
/// Static kinds start from the constant state history `x(θ) = x0`; the
/// history-dependent kinds start from `x(0) = x0` with zero past input.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<u8, CliError> {
    let gamma = require_gamma(cfg)?;
    let kind = cfg.kind.ok_or_else(|| usage("--kind is required"))?;
    let horizon = positive("horizon", cfg.horizon)?.unwrap_or(60.0);
    let (sys, order) = system(cfg)?;
    admitted(&sys, &order)?;
    let x0 = initial_state(cfg, sys.state_dim())?;
    let design = parametric_are::gain(sys.a(), &sys.reduced_input_matrix(), gamma)?;
    let h = step_for(cfg, sys.min_positive_delay())?;

    let traj: Trajectory = match kind.static_kind() {
        Some(sk) => {
            let k = match sk {
                StaticKind::Tpf => tpf_gain(&sys, &design)?.k,
                StaticKind::Tppf => tppf_gain(&sys, &design)?.k,
            };
            let dde = assemble_closed_loop(&sys, &k)?;
            let init = History::constant(&x0, -dde.max_delay(), 0.0)?;
            let mut t = simulate(&dde, &init, horizon, h)?;
            t.inputs = Some(
                t.states
                    .iter()
                    .map(|x| (&k * DVector::from_column_slice(x)).as_slice().to_vec())
                    .collect(),
            );
            t
        }
        None => {
            let hc = match kind {
                Kind::Ppf => HistoryController::pseudo_predictor(&sys, &design, h)?,
                _ => HistoryController::model_reduction(&sys, &design, h)?,
            };
            let span = hc.required_span().max(sys.max_delay());
            let past = History::constant(&vec![0.0; sys.input_dim()], -span, 0.0)?;
            simulate_dynamic(&sys, &hc, &x0, &past, horizon, h)?.0
        }
    };

    let (n, m) = (sys.state_dim(), sys.input_dim());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    let inputs = traj.inputs.clone().unwrap_or_default();
    let rows = (0..traj.len()).map(|s| {
        let mut row = vec![traj.times[s]];
        row.extend_from_slice(&traj.states[s]);
        row.extend(inputs.get(s).cloned().unwrap_or_else(|| vec![f64::NAN; m]));
        row
    });
    let csv = out_file(cfg, &format!("trajectory_{}.csv", kind.name()))?;
    write_csv(&csv, &header, rows)?;

    let window = traj.default_window();
    let rate = decay_rate(&traj, window).ok();
    let meta = object(vec![
        ("kind", Value::from(kind.name())),
        ("gamma", num(gamma)),
        ("horizon", num(horizon)),
        ("step", num(h)),
        ("x0", vector_value(&x0)),
        (
            "initial_history",
            Value::from(if kind.static_kind().is_some() {
                "constant state x0"
            } else {
                "x(0) = x0, zero past input"
            }),
        ),
        ("decay_window", vector_value(&[window.0, window.1])),
        ("decay_rate", opt_num(rate)),
        ("final_norm", num(traj.norms().last().copied().unwrap_or(f64::NAN))),
    ]);
    write_json(&out_file(cfg, &format!("trajectory_{}.json", kind.name()))?, &meta)?;
    println!("{}: decay rate {}", kind.name(), show(rate));
    Ok(EXIT_OK)
}

fn network(path: &Option<PathBuf>) -> Result<Matrix, CliError> {
    match path {
        Some(p) => formats::load_network(p),
        None => Ok(six_agent_adjacency()),
    }
}

/// Writes `consensus.csv` (`t, d, |x1|`) and `consensus.json`.
pub fn cmd_consensus(cfg: &RunConfig) -> Result<u8, CliError> {
    let gamma = positive("gamma", cfg.gamma)?.unwrap_or(0.1);
    let horizon = positive("horizon", cfg.horizon)?.unwrap_or(200.0);
    let (sys, order) = system(cfg)?;
    admitted(&sys, &order)?;
    let net = build_network(network(&cfg.network)?)?;
    let bound = mu_bound(&net)?;
    let mu = positive("mu", cfg.mu)?.unwrap_or(bound);
    let h = step_for(cfg, sys.min_positive_delay())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init: Vec<Vec<f64>> = (0..net.agents())
        .map(|_| (0..sys.state_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let run = consensus::simulate_network(&sys, &net, gamma, mu, &init, horizon, h)?;

    let csv = out_file(cfg, "consensus.csv")?;
    write_csv(
        &csv,
        &["t".to_string(), "d".to_string(), "x1_norm".to_string()],
        (0..run.times().len()).map(|s| vec![run.times()[s], run.disagreement[s], run.leader_norm[s]]),
    )?;
    let d0 = run.disagreement[0];
    let ratio = run.disagreement.last().copied().unwrap_or(f64::NAN) / d0;
    let growth = match reference_growth_check(&run, &sys) {
        Ok(g) => object(vec![
            ("n_star", Value::from(g.n_star)),
            ("k", num(g.k)),
            ("tail_ratio", num(g.tail_ratio)),
            ("holds", Value::from(g.holds)),
        ]),
        Err(_) => Value::Null,
    };
    let summary = object(vec![
        ("gamma", num(gamma)),
        ("mu", num(mu)),
        ("mu_bound", num(bound)),
        ("laplacian_eigenvalues", complex_list(net.eigenvalues())),
        ("spanning_tree", Value::from(net.has_spanning_tree())),
        ("seed", Value::from(cfg.seed)),
        ("disagreement_ratio", num(ratio)),
        ("reference_growth", growth),
    ]);
    write_json(&out_file(cfg, "consensus.json")?, &summary)?;
    println!("consensus: mu={mu:.6} (bound {bound:.6}), d(T)/d(0)={ratio:.3e}");
    Ok(EXIT_OK)
}

/// Runs the acceptance suite; exit 1 if any criterion fails.
pub fn cmd_verify(cfg: &RunConfig) -> Result<u8, CliError> {
    let ids = cfg.criteria.clone().unwrap_or_else(|| CRITERIA.to_vec());
    if let Some(bad) = ids.iter().find(|i| !CRITERIA.contains(i)) {
        return Err(usage(format!("unknown criterion {bad}; valid ids are 1..=10")));
    }
    let mut suite = Suite::new(cfg.workers);
    if cfg.corrupt_gain {
        suite = suite.with_gain_builder(acceptance::corrupted_gain);
    }
    let checks = suite.run(&ids);
    for c in &checks {
        println!("{}", c.line());
    }
    write_json(&out_file(cfg, "verify.json")?, &report_value(&checks))?;
    Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_VERIFY })
}

/// Re-reads a system file and writes it back canonically (sorted channels).
pub fn normalize_system(input: &Path, output: &Path) -> Result<(), CliError> {
    let (sys, _) = formats::load_system(input)?;
    write_json(output, &formats::system_value(&sys, None))
}
