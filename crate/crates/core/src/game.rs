//! Strong simulation of the controlled state and Monte Carlo estimation of
//! payoffs, robust values, the value function and the dynamic programming
//! residual.
//!
//! Every path `p` of an experiment draws its noise from `path_seed(seed, p)`,
//! so all strategy/adversary pairs see the same Brownian and auxiliary
//! increments (common random numbers), and results do not depend on how paths
//! are scheduled.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::PathExecutor;
use crate::noise::{path_seed, sample_noise, subkey, NoisePath, TimeGrid};
use crate::pde::ValueField;
use crate::sde::{euler_step_in_place, ControlSetLabel, ProblemSpec, StepScratch};
use crate::stats::{mean_and_se, ValueEstimate};
use crate::strategies::{
    check_nonanticipative, concatenate, constant_strategy, make_grid_strategy, realize_open_loop,
    uniform_decision_times, Checkable, ElementaryStrategy, Generator, InfoLevel, OpenLoopControl, PathPairConfig,
    PathView, StoppingRule, StrategyRunner,
};

const CHUNK: usize = 64;

/// One simulated path of the state system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `(stopped_at + 1) × dim`, row-major.
    pub states: Vec<f64>,
    pub dim: usize,
    /// Controls used on `(t_i, t_{i+1}]`.
    pub u: Vec<usize>,
    pub v: Vec<usize>,
    pub seed: u64,
    /// `g(X_T)`, absent when the path was stopped early.
    pub payoff: Option<f64>,
    pub stopped_at: usize,
    /// Stopping indices of `α` that had to be raised to keep the schedule monotone.
    pub clamps: usize,
}

impl Trajectory {
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.stopped_at)
    }

    /// Bitwise equality of states and controls.
    pub fn same_bits(&self, other: &Trajectory) -> bool {
        self.states.len() == other.states.len()
            && self
                .states
                .iter()
                .zip(&other.states)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.u == other.u
            && self.v == other.v
    }
}

enum Opponent<'a> {
    Path(&'a [usize]),
    Runner(StrategyRunner<'a>),
}

struct Buffers {
    states: Vec<f64>,
    x: Vec<f64>,
    scratch: StepScratch,
}

impl Buffers {
    fn new(spec: &ProblemSpec) -> Self {
        Self {
            states: Vec::new(),
            x: vec![0.0; spec.dim],
            scratch: StepScratch::new(spec),
        }
    }
}

struct March {
    stopped_at: usize,
    clamps: usize,
}

/// Segment-wise Euler march of `α` against an opponent, optionally stopped at `stop`.
#[allow(clippy::too_many_arguments)]
fn march(
    spec: &ProblemSpec,
    x0: &[f64],
    noise: &NoisePath,
    alpha: &ElementaryStrategy,
    mut opponent: Opponent<'_>,
    stop: Option<&StoppingRule>,
    buf: &mut Buffers,
    mut record: Option<(&mut Vec<usize>, &mut Vec<usize>)>,
) -> Result<March> {
    let times = noise.grid.times();
    let n = noise.steps();
    let d = spec.dim;
    buf.states.clear();
    buf.states.extend_from_slice(x0);
    let mut runner = alpha.runner(times);
    let mut stop_monitor = stop.map(|r| r.monitor(times));
    for i in 0..n {
        let (u, v) = {
            let prefix = PathView::new(times, &buf.states, d);
            if let (Some(rule), Some(m)) = (stop, stop_monitor.as_mut()) {
                if let Some(j) = m.poll(rule, &prefix) {
                    return Ok(March {
                        stopped_at: j,
                        clamps: runner.clamps(),
                    });
                }
            }
            let u = runner.next_control(&prefix)?;
            let v = match &mut opponent {
                Opponent::Path(p) => p[i],
                Opponent::Runner(r) => r.next_control(&prefix)?,
            };
            (u, v)
        };
        if let Some((us, vs)) = record.as_mut() {
            us.push(u);
            vs.push(v);
        }
        buf.x.copy_from_slice(&buf.states[i * d..(i + 1) * d]);
        euler_step_in_place(
            spec,
            &mut buf.scratch,
            times[i],
            noise.grid.dt(i),
            &mut buf.x,
            u,
            v,
            noise.dw_at(i),
        )?;
        buf.states.extend_from_slice(&buf.x);
    }
    Ok(March {
        stopped_at: n,
        clamps: runner.clamps(),
    })
}

fn check_setup(spec: &ProblemSpec, s: f64, x: &[f64], alpha: &ElementaryStrategy, noise: &NoisePath) -> Result<()> {
    if x.len() != spec.dim || x.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(
            "initial state has the wrong dimension or is not finite".into(),
        ));
    }
    if noise.dim_w != spec.dim_w {
        return Err(Error::InvalidInput("noise dimension does not match the problem".into()));
    }
    let tol = 1e-12 * (1.0 + libm::fabs(spec.horizon));
    if libm::fabs(noise.grid.start() - s) > tol || libm::fabs(noise.grid.end() - spec.horizon) > tol {
        return Err(Error::InvalidInput(format!(
            "noise grid covers [{}, {}], expected [{s}, {}]",
            noise.grid.start(),
            noise.grid.end(),
            spec.horizon
        )));
    }
    if alpha.target() != ControlSetLabel::U {
        return Err(Error::Structural(format!(
            "strategy {} does not act on U",
            alpha.name()
        )));
    }
    let start = PathView::new(noise.grid.times(), x, spec.dim);
    let fired = alpha.start_rule().evaluate(&start);
    if fired != 0 {
        return Err(Error::Interval {
            t: noise.grid.start(),
            start: noise.grid.times()[fired],
        });
    }
    Ok(())
}

fn finish(
    spec: &ProblemSpec,
    noise: &NoisePath,
    buf: Buffers,
    m: March,
    u: Vec<usize>,
    v: Vec<usize>,
) -> Result<Trajectory> {
    let payoff = if m.stopped_at == noise.steps() {
        Some(spec.payoff(&buf.states[m.stopped_at * spec.dim..])?)
    } else {
        None
    };
    Ok(Trajectory {
        times: noise.grid.times().to_vec(),
        states: buf.states,
        dim: spec.dim,
        u,
        v,
        seed: noise.seed,
        payoff,
        stopped_at: m.stopped_at,
        clamps: m.clamps,
    })
}

/// `X` under an elementary strategy `α` and an open-loop adversary.
pub fn simulate_strong(
    spec: &ProblemSpec,
    s: f64,
    x: &[f64],
    alpha: &ElementaryStrategy,
    v: &OpenLoopControl,
    noise: &NoisePath,
) -> Result<Trajectory> {
    check_setup(spec, s, x, alpha, noise)?;
    let path = realize_open_loop(v, noise, &spec.v)?;
    let mut buf = Buffers::new(spec);
    let (mut us, mut vs) = (Vec::new(), Vec::new());
    let m = march(
        spec,
        x,
        noise,
        alpha,
        Opponent::Path(&path),
        None,
        &mut buf,
        Some((&mut us, &mut vs)),
    )?;
    finish(spec, noise, buf, m, us, vs)
}

/// `X` under two elementary strategies, `β` acting on `V`.
pub fn simulate_feedback_pair(
    spec: &ProblemSpec,
    s: f64,
    x: &[f64],
    alpha: &ElementaryStrategy,
    beta: &ElementaryStrategy,
    noise: &NoisePath,
) -> Result<Trajectory> {
    check_setup(spec, s, x, alpha, noise)?;
    check_beta(beta)?;
    let mut buf = Buffers::new(spec);
    let (mut us, mut vs) = (Vec::new(), Vec::new());
    let runner = beta.runner(noise.grid.times());
    let m = march(
        spec,
        x,
        noise,
        alpha,
        Opponent::Runner(runner),
        None,
        &mut buf,
        Some((&mut us, &mut vs)),
    )?;
    finish(spec, noise, buf, m, us, vs)
}

fn check_beta(beta: &ElementaryStrategy) -> Result<()> {
    if beta.target() != ControlSetLabel::V {
        return Err(Error::Structural(format!("strategy {} does not act on V", beta.name())));
    }
    Ok(())
}

/// Runs `(α, β)`, replays the realized `v` as an open-loop control and checks
/// that `(α, v)` reproduces the trajectory bit for bit.
pub fn embed_feedback_as_openloop(
    spec: &ProblemSpec,
    s: f64,
    x: &[f64],
    alpha: &ElementaryStrategy,
    beta: &ElementaryStrategy,
    noise: &NoisePath,
) -> Result<(Trajectory, OpenLoopControl)> {
    let closed = simulate_feedback_pair(spec, s, x, alpha, beta, noise)?;
    let replay = OpenLoopControl::replay(format!("replay({})", beta.name()), closed.v.clone());
    let open = simulate_strong(spec, s, x, alpha, &replay, noise)?;
    if !closed.same_bits(&open) {
        let step = closed
            .states
            .iter()
            .zip(&open.states)
            .position(|(a, b)| a.to_bits() != b.to_bits())
            .map_or(closed.states.len().min(open.states.len()), |k| k / spec.dim);
        return Err(Error::Invariant(format!(
            "open-loop replay of {} diverges from the closed loop at step {step} (seed {:#x})",
            beta.name(),
            noise.seed
        )));
    }
    Ok((closed, replay))
}

/// An adversary: an open-loop control process or a feedback strategy on `V`.
#[derive(Debug, Clone)]
pub enum AdversaryMember {
    OpenLoop(OpenLoopControl),
    Feedback(ElementaryStrategy),
}

impl AdversaryMember {
    pub fn id(&self) -> &str {
        match self {
            AdversaryMember::OpenLoop(c) => &c.name,
            AdversaryMember::Feedback(b) => b.name(),
        }
    }

    /// Feedback strategies only see the state, hence the Brownian filtration.
    pub fn info_level(&self) -> InfoLevel {
        match self {
            AdversaryMember::OpenLoop(c) => c.info,
            AdversaryMember::Feedback(_) => InfoLevel::BrownianOnly,
        }
    }
}

/// A finite, non-empty set of adversaries standing in for `inf` over `𝒱(s)`.
#[derive(Debug, Clone)]
pub struct AdversaryFamily {
    members: Vec<AdversaryMember>,
}

impl AdversaryFamily {
    pub fn new(members: Vec<AdversaryMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidInput("adversary family is empty".into()));
        }
        for m in &members {
            if let AdversaryMember::Feedback(b) = m {
                check_beta(b)?;
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[AdversaryMember] {
        &self.members
    }

    pub fn ids(&self) -> Vec<String> {
        self.members.iter().map(|m| String::from(m.id())).collect()
    }

    pub fn needs_extra_noise(&self) -> bool {
        self.members.iter().any(|m| m.info_level() == InfoLevel::Enlarged)
    }

    /// The members adapted to the Brownian filtration.
    pub fn brownian_only(&self) -> Result<Self> {
        Self::new(
            self.members
                .iter()
                .filter(|m| m.info_level() == InfoLevel::BrownianOnly)
                .cloned()
                .collect(),
        )
    }

    pub fn with(mut self, member: AdversaryMember) -> Self {
        self.members.push(member);
        self
    }
}

/// Sampling parameters of a Monte Carlo experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    /// Euler steps on `[s, T]`.
    pub steps: usize,
    pub seed: u64,
}

/// What a path contributes at its end.
#[derive(Debug, Clone, Copy)]
pub enum Terminal<'a> {
    /// `g(X_T)`.
    Payoff,
    /// `w(ρ, X_ρ)` read from a solved field by interpolation.
    FieldAt {
        rule: &'a StoppingRule,
        field: &'a ValueField,
    },
}

/// Per-path outcomes and estimates for every (strategy, adversary) pair.
#[derive(Debug, Clone)]
pub struct PayoffTable {
    pub strategies: Vec<String>,
    pub adversaries: Vec<String>,
    pub n_paths: usize,
    pub seed: u64,
    samples: Vec<f64>,
    estimates: Vec<ValueEstimate>,
}

impl PayoffTable {
    fn pair(&self, strategy: usize, adversary: usize) -> usize {
        strategy * self.adversaries.len() + adversary
    }

    pub fn estimate(&self, strategy: usize, adversary: usize) -> &ValueEstimate {
        &self.estimates[self.pair(strategy, adversary)]
    }

    /// Per-path outcomes, in path order.
    pub fn samples(&self, strategy: usize, adversary: usize) -> &[f64] {
        let k = self.pair(strategy, adversary);
        &self.samples[k * self.n_paths..(k + 1) * self.n_paths]
    }

    /// Index of the adversary with the smallest mean among `allowed`; lowest index on ties.
    pub fn worst_adversary(&self, strategy: usize, allowed: &[usize]) -> usize {
        let mut best = allowed[0];
        for &a in &allowed[1..] {
            if self.estimate(strategy, a).mean < self.estimate(strategy, best).mean {
                best = a;
            }
        }
        best
    }

    /// `(best strategy, its worst adversary)` of the max-min over `allowed` adversaries.
    pub fn max_min(&self, allowed: &[usize]) -> (usize, usize) {
        let mut best = (0, self.worst_adversary(0, allowed));
        for s in 1..self.strategies.len() {
            let w = self.worst_adversary(s, allowed);
            if self.estimate(s, w).mean > self.estimate(best.0, best.1).mean {
                best = (s, w);
            }
        }
        best
    }

    pub fn all_adversaries(&self) -> Vec<usize> {
        (0..self.adversaries.len()).collect()
    }
}

/// Simulates every `(α, adversary)` pair on common noise.
#[allow(clippy::too_many_arguments)]
pub fn payoff_table<E: PathExecutor>(
    exec: &E,
    spec: &ProblemSpec,
    s: f64,
    x: &[f64],
    strategies: &[ElementaryStrategy],
    family: &AdversaryFamily,
    mc: &McConfig,
    terminal: Terminal<'_>,
) -> Result<PayoffTable> {
    if strategies.is_empty() {
        return Err(Error::InvalidInput("strategy family is empty".into()));
    }
    if mc.n_paths < 2 {
        return Err(Error::InvalidInput(
            "at least two paths are needed for a standard error".into(),
        ));
    }
    let grid = TimeGrid::uniform(s, spec.horizon, mc.steps)?;
    let dim_extra = usize::from(family.needs_extra_noise());
    {
        let probe = NoisePath::zero(grid.clone(), spec.dim_w, dim_extra);
        for alpha in strategies {
            check_setup(spec, s, x, alpha, &probe)?;
        }
    }
    let members = family.members();
    let pairs = strategies.len() * members.len();
    let chunks = mc.n_paths.div_ceil(CHUNK);

    let job = |c: usize| -> Result<Vec<f64>> {
        let first = c * CHUNK;
        let last = (first + CHUNK).min(mc.n_paths);
        let mut out = Vec::with_capacity((last - first) * pairs);
        let mut buf = Buffers::new(spec);
        let mut open: Vec<Option<Vec<usize>>> = vec![None; members.len()];
        for p in first..last {
            let noise = sample_noise(&grid, path_seed(mc.seed, p as u64), spec.dim_w, dim_extra);
            for (slot, m) in open.iter_mut().zip(members) {
                *slot = match m {
                    AdversaryMember::OpenLoop(c) => Some(realize_open_loop(c, &noise, &spec.v)?),
                    AdversaryMember::Feedback(_) => None,
                };
            }
            for alpha in strategies {
                for (m, path) in members.iter().zip(&open) {
                    let opponent = match (m, path) {
                        (AdversaryMember::Feedback(b), _) => Opponent::Runner(b.runner(grid.times())),
                        (_, Some(path)) => Opponent::Path(path),
                        _ => unreachable!(),
                    };
                    let stop = match terminal {
                        Terminal::Payoff => None,
                        Terminal::FieldAt { rule, .. } => Some(rule),
                    };
                    let end = march(spec, x, &noise, alpha, opponent, stop, &mut buf, None)?;
                    let at = &buf.states[end.stopped_at * spec.dim..(end.stopped_at + 1) * spec.dim];
                    out.push(match terminal {
                        Terminal::Payoff => spec.payoff(at)?,
                        Terminal::FieldAt { field, .. } => field.value_at(grid.times()[end.stopped_at], at),
                    });
                }
            }
        }
        Ok(out)
    };
    let per_chunk = exec.map(chunks, &job)?;

    // Path-major chunks to pair-major samples.
    let mut samples = vec![0.0; pairs * mc.n_paths];
    let mut p = 0;
    for chunk in &per_chunk {
        for row in chunk.chunks_exact(pairs) {
            for (k, value) in row.iter().enumerate() {
                samples[k * mc.n_paths + p] = *value;
            }
            p += 1;
        }
    }
    let mut estimates = Vec::with_capacity(pairs);
    for alpha in strategies {
        for m in members {
            let k = estimates.len();
            estimates.push(ValueEstimate::from_samples(
                &samples[k * mc.n_paths..(k + 1) * mc.n_paths],
                mc.seed,
                String::from(alpha.name()),
                String::from(m.id()),
            ));
        }
    }
    Ok(PayoffTable {
        strategies: strategies.iter().map(|a| String::from(a.name())).collect(),
        adversaries: family.ids(),
        n_paths: mc.n_paths,
        seed: mc.seed,
        samples,
        estimates,
    })
}

/// `𝔼[g(X_T)]` under `(α, adversary)`.
pub fn estimate_payoff<E: PathExecutor>(
    exec: &E,
    spec: &ProblemSpec,
    s: f64,
    x: &[f64],
    alpha: &ElementaryStrategy,
    adversary: &AdversaryMember,
    mc: &McConfig,
) -> Result<ValueEstimate> {
    let family = AdversaryFamily::new(vec![adversary.clone()])?;
    let table = payoff_table(
        exec,
        spec,
        s,
        x,
        core::slice::from_ref(alpha),
        &family,
        mc,
        Terminal::Payoff,
    )?;
    Ok(table.estimate(0, 0).clone())
}

/// `min` over a family of the payoff of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustValue {
    /// Estimate of the minimizing member.
    pub estimate: ValueEstimate,
    pub worst: String,
    pub members: Vec<ValueEstimate>,
}

fn robust_from_table(table: &PayoffTable, strategy: usize, allowed: &[usize]) -> RobustValue {
    let worst = table.worst_adversary(strategy, allowed);
    RobustValue {
        estimate: table.estimate(strategy, worst).clone(),
        worst: table.adversaries[worst].clone(),
        members: allowed.iter().map(|&a| table.estimate(strategy, a).clone()).collect(),
    }
}

pub fn robust_value<E: PathExecutor>(
    exec: &E,
    spec: &ProblemSpec,
    s: f64,
    x: &[f64],
    alpha: &ElementaryStrategy,
    family: &AdversaryFamily,
    mc: &McConfig,
) -> Result<RobustValue> {
    let table = payoff_table(
        exec,
        spec,
        s,
        x,
        core::slice::from_ref(alpha),
        family,
        mc,
        Terminal::Payoff,
    )?;
    Ok(robust_from_table(&table, 0, &table.all_adversaries()))
}

/// `max_α min_adv` estimate of the value.
///
/// Biased low in `α` (finite strategy family) and high in the adversary
/// (finite adversary family).
#[derive(Debug, Clone)]
pub struct ValueFunctionEstimate {
    pub value: ValueEstimate,
    pub best_strategy: String,
    pub worst_adversary: String,
    /// Robust value of every strategy, in family order.
    pub per_strategy: Vec<RobustValue>,
    pub table: PayoffTable,
}

fn value_from_table(table: PayoffTable, allowed: &[usize]) -> ValueFunctionEstimate {
    let (best, worst) = table.max_min(allowed);
    ValueFunctionEstimate {
        value: table.estimate(best, worst).clone(),
        best_strategy: table.strategies[best].clone(),
        worst_adversary: table.adversaries[worst].clone(),
        per_strategy: (0..table.strategies.len())
            .map(|s| robust_from_table(&table, s, allowed))
            .collect(),
        table,
    }
}

pub fn estimate_value_function<E: PathExecutor>(
    exec: &E,
    spec: &ProblemSpec,
    s: f64,
    x: &[f64],
    strategies: &[ElementaryStrategy],
    family: &AdversaryFamily,
    mc: &McConfig,
) -> Result<ValueFunctionEstimate> {
    let table = payoff_table(exec, spec, s, x, strategies, family, mc, Terminal::Payoff)?;
    let all = table.all_adversaries();
    Ok(value_from_table(table, &all))
}

/// Result of a dynamic programming check at `(s, x)`.
#[derive(Debug, Clone)]
pub struct DppReport {
    pub field_value: f64,
    /// `max_α min_adv 𝔼[w(ρ, X_ρ)]`.
    pub dpp: ValueFunctionEstimate,
    pub residual: f64,
    pub std_error: f64,
}

/// Compares `w(s, x)` with the optimized expectation of `w(ρ, X_ρ)`.
///
/// Refuses stopping rules that fail the non-anticipativity check.
#[allow(clippy::too_many_arguments)]
pub fn dpp_check<E: PathExecutor>(
    exec: &E,
    spec: &ProblemSpec,
    field: &ValueField,
    s: f64,
    x: &[f64],
    rho: &StoppingRule,
    strategies: &[ElementaryStrategy],
    family: &AdversaryFamily,
    mc: &McConfig,
) -> Result<DppReport> {
    let pair_config = PathPairConfig {
        steps: mc.steps,
        horizon: spec.horizon,
        x0: x.to_vec(),
        dim_w: spec.dim,
        ..PathPairConfig::default()
    };
    let report = check_nonanticipative(Checkable::Rule(rho), 200, subkey(mc.seed, 0x4450_5000), &pair_config);
    if !report.pass() {
        return Err(Error::Structural(format!(
            "stopping rule {rho:?} anticipates the path: {}",
            report.first_failure.unwrap_or_default()
        )));
    }
    let table = payoff_table(
        exec,
        spec,
        s,
        x,
        strategies,
        family,
        mc,
        Terminal::FieldAt { rule: rho, field },
    )?;
    let all = table.all_adversaries();
    let dpp = value_from_table(table, &all);
    let field_value = field.value_at(s, x);
    Ok(DppReport {
        field_value,
        residual: libm::fabs(field_value - dpp.value.mean),
        std_error: dpp.value.std_error,
        dpp,
    })
}

/// Robust values of one strategy under a Brownian-only family and an
/// enlarged family containing it.
#[derive(Debug, Clone)]
pub struct FiltrationReport {
    pub base: RobustValue,
    pub enlarged: RobustValue,
    /// `base − enlarged`; non-negative under common random numbers.
    pub delta: f64,
    /// `sqrt(SE_base² + SE_enlarged²)`.
    pub se_combined: f64,
    /// Standard error of the per-path difference of the two minimizers.
    pub se_paired: f64,
}

/// `enlarged` must contain every member of `base` (matched by id).
#[allow(clippy::too_many_arguments)]
pub fn filtration_experiment<E: PathExecutor>(
    exec: &E,
    spec: &ProblemSpec,
    s: f64,
    x: &[f64],
    alpha: &ElementaryStrategy,
    base: &AdversaryFamily,
    enlarged: &AdversaryFamily,
    mc: &McConfig,
) -> Result<FiltrationReport> {
    let ids = enlarged.ids();
    let mut base_idx = Vec::new();
    for id in base.ids() {
        match ids.iter().position(|e| *e == id) {
            Some(k) => base_idx.push(k),
            None => {
                return Err(Error::InvalidInput(format!(
                    "enlarged family does not contain base member {id}"
                )))
            }
        }
    }
    let table = payoff_table(
        exec,
        spec,
        s,
        x,
        core::slice::from_ref(alpha),
        enlarged,
        mc,
        Terminal::Payoff,
    )?;
    let base_rv = robust_from_table(&table, 0, &base_idx);
    let enlarged_rv = robust_from_table(&table, 0, &table.all_adversaries());
    let wb = table.worst_adversary(0, &base_idx);
    let we = table.worst_adversary(0, &table.all_adversaries());
    let diffs: Vec<f64> = table
        .samples(0, wb)
        .iter()
        .zip(table.samples(0, we))
        .map(|(a, b)| a - b)
        .collect();
    let (_, se_paired) = mean_and_se(&diffs);
    let se_combined = libm::sqrt(
        base_rv.estimate.std_error * base_rv.estimate.std_error
            + enlarged_rv.estimate.std_error * enlarged_rv.estimate.std_error,
    );
    Ok(FiltrationReport {
        delta: base_rv.estimate.mean - enlarged_rv.estimate.mean,
        base: base_rv,
        enlarged: enlarged_rv,
        se_combined,
        se_paired,
    })
}

/// Indices of the smallest and largest first coordinate of a control set.
fn extremes(spec: &ProblemSpec, set: ControlSetLabel) -> (usize, usize) {
    let cs = match set {
        ControlSetLabel::U => &spec.u,
        ControlSetLabel::V => &spec.v,
    };
    let (mut lo, mut hi) = (0, 0);
    for i in 1..cs.len() {
        if cs.point(i)[0] < cs.point(lo)[0] {
            lo = i;
        }
        if cs.point(i)[0] > cs.point(hi)[0] {
            hi = i;
        }
    }
    (lo, hi)
}

/// Knobs of the default adversary family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyOptions {
    /// Number of random piecewise-constant members.
    pub piecewise_members: usize,
    pub piecewise_pieces: usize,
    pub key: u64,
    pub include_enlarged: bool,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            piecewise_members: 4,
            piecewise_pieces: 8,
            key: 0x5eed_ad7e,
            include_enlarged: true,
        }
    }
}

/// Constants, sign-of-`W` switches, random piecewise-constant controls,
/// sign-of-auxiliary-noise switches (enlarged filtration) and, when a lower
/// field is given, its worst-case `V` feedback on every simulation step.
pub fn default_adversary_family(
    spec: &ProblemSpec,
    s: f64,
    lower: Option<&ValueField>,
    sim_steps: usize,
    options: &FamilyOptions,
) -> Result<AdversaryFamily> {
    let mut members = Vec::new();
    for j in 0..spec.v.len() {
        members.push(AdversaryMember::OpenLoop(OpenLoopControl::constant(
            format!("const_v{j}"),
            j,
        )));
    }
    let (lo, hi) = extremes(spec, ControlSetLabel::V);
    if lo != hi {
        members.push(AdversaryMember::OpenLoop(OpenLoopControl::new(
            "sign_w_up",
            Generator::SignOfBrownian {
                coord: 0,
                nonneg: hi,
                neg: lo,
            },
        )));
        members.push(AdversaryMember::OpenLoop(OpenLoopControl::new(
            "sign_w_down",
            Generator::SignOfBrownian {
                coord: 0,
                nonneg: lo,
                neg: hi,
            },
        )));
    }
    for k in 0..options.piecewise_members {
        members.push(AdversaryMember::OpenLoop(OpenLoopControl::new(
            format!("piecewise_{k}"),
            Generator::Piecewise {
                pieces: options.piecewise_pieces,
                key: subkey(options.key, k as u64),
            },
        )));
    }
    if let Some(field) = lower {
        let times = uniform_decision_times(s, spec.horizon, sim_steps);
        let beta = make_grid_strategy("pde_worst_v", field.feedback_v().clone(), &times)?;
        members.push(AdversaryMember::Feedback(beta));
    }
    if options.include_enlarged && lo != hi {
        members.push(AdversaryMember::OpenLoop(OpenLoopControl::new(
            "sign_extra_up",
            Generator::SignOfExtra {
                coord: 0,
                nonneg: hi,
                neg: lo,
            },
        )));
        members.push(AdversaryMember::OpenLoop(OpenLoopControl::new(
            "sign_extra_down",
            Generator::SignOfExtra {
                coord: 0,
                nonneg: lo,
                neg: hi,
            },
        )));
    }
    AdversaryFamily::new(members)
}

/// Grid feedback strategies from a field's `U` map, one per decision count.
pub fn grid_strategy_family(
    field: &ValueField,
    s: f64,
    horizon: f64,
    decision_counts: &[usize],
) -> Result<Vec<ElementaryStrategy>> {
    decision_counts
        .iter()
        .map(|&n| {
            make_grid_strategy(
                format!("grid_u_{n}"),
                field.feedback_u().clone(),
                &uniform_decision_times(s, horizon, n),
            )
        })
        .collect()
}

/// The built-in strategies of both players used by the embedding suite.
///
/// `U`: every constant and the lower-field grid feedback at 2, 4, 8 and 16
/// decision times. `V`: every constant, the worst-case feedback of the lower
/// field, the minimizing feedback of the upper field, and a switch from the
/// largest to the smallest control when `|x|` first reaches ½.
pub fn builtin_strategy_pairs(
    spec: &ProblemSpec,
    s: f64,
    lower: &ValueField,
    upper: &ValueField,
    sim_steps: usize,
) -> Result<(Vec<ElementaryStrategy>, Vec<ElementaryStrategy>)> {
    let mut alphas: Vec<ElementaryStrategy> = (0..spec.u.len())
        .map(|i| constant_strategy(format!("const_u{i}"), ControlSetLabel::U, i))
        .collect();
    alphas.extend(grid_strategy_family(lower, s, spec.horizon, &[2, 4, 8, 16])?);

    let mut betas: Vec<ElementaryStrategy> = (0..spec.v.len())
        .map(|j| constant_strategy(format!("const_v{j}"), ControlSetLabel::V, j))
        .collect();
    let fine = uniform_decision_times(s, spec.horizon, sim_steps);
    betas.push(make_grid_strategy("lower_worst_v", lower.feedback_v().clone(), &fine)?);
    betas.push(make_grid_strategy("upper_v", upper.feedback_v().clone(), &fine)?);
    let (lo, hi) = extremes(spec, ControlSetLabel::V);
    let exit = StoppingRule::exit_norm(0.5);
    let tail = ElementaryStrategy::new(
        "low",
        ControlSetLabel::V,
        exit.clone(),
        Vec::new(),
        vec![crate::strategies::Action::Constant(lo)],
    )?;
    let head = constant_strategy("high", ControlSetLabel::V, hi);
    betas.push(concatenate(&head, &tail, &exit)?.with_name("switch_at_half"));
    Ok((alphas, betas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::hamiltonian::Side;
    use crate::noise::sample_noise;
    use crate::pde::{solve_isaacs, SpaceTimeGrid};
    use crate::problems::{self, Payoff};

    fn noise(steps: usize, seed: u64) -> NoisePath {
        sample_noise(&TimeGrid::uniform(0.0, 1.0, steps).unwrap(), seed, 1, 1)
    }

    fn u_const(i: usize) -> ElementaryStrategy {
        constant_strategy("u", ControlSetLabel::U, i)
    }

    fn v_const(j: usize) -> ElementaryStrategy {
        constant_strategy("v", ControlSetLabel::V, j)
    }

    fn fields(spec: &ProblemSpec) -> (ValueField, ValueField) {
        let axis = SpaceTimeGrid::axis(-4.0, 4.0, 0.1).unwrap();
        let grid = SpaceTimeGrid::cfl_tight(spec, vec![axis]).unwrap();
        (
            solve_isaacs(spec, &grid, Side::Lower).unwrap(),
            solve_isaacs(spec, &grid, Side::Upper).unwrap(),
        )
    }

    #[test]
    fn frozen_state_keeps_payoff() {
        let spec = problems::frozen(1.0).unwrap();
        let traj = simulate_strong(
            &spec,
            0.0,
            &[0.3],
            &u_const(0),
            &OpenLoopControl::constant("c", 0),
            &noise(20, 3),
        )
        .unwrap();
        assert!(traj.states.iter().all(|x| *x == 0.3));
        assert_eq!(traj.payoff, Some(libm::tanh(0.3)));
    }

    #[test]
    fn deterministic_linear_drift() {
        let spec = problems::drift_control_with(1.0, 0.0).unwrap();
        let traj = simulate_strong(
            &spec,
            0.0,
            &[0.0],
            &u_const(2),
            &OpenLoopControl::constant("c", 0),
            &noise(64, 1),
        )
        .unwrap();
        assert_eq!(traj.last(), &[0.5]);
    }

    #[test]
    fn trajectory_replays_with_euler_steps() {
        let spec = problems::pennies(1.0).unwrap();
        let nz = noise(32, 9);
        let adv = OpenLoopControl::new(
            "sw",
            Generator::SignOfBrownian {
                coord: 0,
                nonneg: 1,
                neg: 0,
            },
        );
        let traj = simulate_strong(&spec, 0.0, &[0.1], &u_const(1), &adv, &nz).unwrap();
        for i in 0..32 {
            let next = crate::sde::euler_step(
                &spec,
                nz.grid.times()[i],
                nz.grid.dt(i),
                traj.state(i),
                traj.u[i],
                traj.v[i],
                nz.dw_at(i),
            )
            .unwrap();
            assert_eq!(next.as_slice(), traj.state(i + 1));
        }
        let again = simulate_strong(&spec, 0.0, &[0.1], &u_const(1), &adv, &nz).unwrap();
        assert!(traj.same_bits(&again));
    }

    #[test]
    fn constant_beta_matches_constant_generator() {
        let spec = problems::pennies(1.0).unwrap();
        let nz = noise(40, 5);
        let a = simulate_feedback_pair(&spec, 0.0, &[0.0], &u_const(0), &v_const(1), &nz).unwrap();
        let b = simulate_strong(&spec, 0.0, &[0.0], &u_const(0), &OpenLoopControl::constant("c", 1), &nz).unwrap();
        assert!(a.same_bits(&b));
    }

    #[test]
    fn pennies_plus_plus_is_drift_plus_brownian() {
        let spec = problems::pennies(1.0).unwrap();
        let nz = noise(50, 11);
        let traj = simulate_feedback_pair(&spec, 0.0, &[0.2], &u_const(1), &v_const(1), &nz).unwrap();
        let mut x = 0.2;
        for i in 0..50 {
            x += nz.grid.dt(i) + nz.dw_at(i)[0];
            assert_eq!(traj.state(i + 1)[0], x);
        }
    }

    struct SumDrift;
    impl crate::sde::Coefficients for SumDrift {
        fn drift(&self, _: f64, _: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
            out[0] = u[0] + v[0];
        }
        fn diffusion(&self, _: f64, _: &[f64], _: &[f64], _: &[f64], out: &mut [f64]) {
            out[0] = 1.0;
        }
        fn payoff(&self, x: &[f64]) -> f64 {
            libm::tanh(x[0])
        }
    }

    #[test]
    fn swapping_symmetric_controls() {
        let set = crate::sde::ControlSet::scalar("U", &[-1.0, 0.25, 2.0]).unwrap();
        let spec = ProblemSpec::new("sum", 1, 1, 1.0, 1.0, alloc::sync::Arc::new(SumDrift), set.clone(), set).unwrap();
        let nz = noise(30, 2);
        let a = simulate_feedback_pair(&spec, 0.0, &[0.0], &u_const(0), &v_const(2), &nz).unwrap();
        let b = simulate_feedback_pair(&spec, 0.0, &[0.0], &u_const(2), &v_const(0), &nz).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn embedding_on_fields_and_hitting_rules() {
        for spec in [problems::pennies(1.0).unwrap(), problems::drift_control(1.0).unwrap()] {
            let (lower, upper) = fields(&spec);
            let (alphas, betas) = builtin_strategy_pairs(&spec, 0.0, &lower, &upper, 64).unwrap();
            for seed in 0..5 {
                let nz = noise(64, seed);
                for a in &alphas {
                    for b in &betas {
                        embed_feedback_as_openloop(&spec, 0.0, &[0.0], a, b, &nz).unwrap();
                    }
                }
            }
        }
    }

    #[test]
    fn constant_payoff_estimates_exactly() {
        let spec = problems::constant(1.0, 1.0).unwrap();
        let mc = McConfig {
            n_paths: 50,
            steps: 10,
            seed: 1,
        };
        let est = estimate_payoff(
            &Sequential,
            &spec,
            0.0,
            &[0.0],
            &u_const(0),
            &AdversaryMember::OpenLoop(OpenLoopControl::constant("c", 0)),
            &mc,
        )
        .unwrap();
        assert_eq!((est.mean, est.std_error), (1.0, 0.0));
    }

    #[test]
    fn deterministic_problem_has_zero_error() {
        let spec = problems::drift_control_with(1.0, 0.0).unwrap();
        let mc = McConfig {
            n_paths: 10,
            steps: 16,
            seed: 4,
        };
        let est = estimate_payoff(
            &Sequential,
            &spec,
            0.0,
            &[0.0],
            &u_const(2),
            &AdversaryMember::OpenLoop(OpenLoopControl::constant("c", 0)),
            &mc,
        )
        .unwrap();
        assert_eq!(est.std_error, 0.0);
        assert!((est.mean - libm::tanh(0.5)).abs() < 1e-15);
    }

    #[test]
    fn pennies_worst_constant_reverses_drift() {
        let spec = problems::pennies(1.0).unwrap();
        let family = AdversaryFamily::new(vec![
            AdversaryMember::OpenLoop(OpenLoopControl::constant("plus", 1)),
            AdversaryMember::OpenLoop(OpenLoopControl::constant("minus", 0)),
        ])
        .unwrap();
        let mc = McConfig {
            n_paths: 400,
            steps: 16,
            seed: 7,
        };
        let rv = robust_value(&Sequential, &spec, 0.0, &[0.0], &u_const(1), &family, &mc).unwrap();
        assert_eq!(rv.worst, "minus");
        let dup = family
            .clone()
            .with(AdversaryMember::OpenLoop(OpenLoopControl::constant("minus2", 0)));
        let rv2 = robust_value(&Sequential, &spec, 0.0, &[0.0], &u_const(1), &dup, &mc).unwrap();
        assert_eq!(rv.estimate.mean, rv2.estimate.mean);
        let single = robust_value(
            &Sequential,
            &spec,
            0.0,
            &[0.0],
            &u_const(1),
            &AdversaryFamily::new(vec![family.members()[0].clone()]).unwrap(),
            &mc,
        )
        .unwrap();
        let plain = estimate_payoff(&Sequential, &spec, 0.0, &[0.0], &u_const(1), &family.members()[0], &mc).unwrap();
        assert_eq!(single.estimate, plain);
    }

    #[test]
    fn dpp_at_start_is_exact_and_anticipating_rules_are_refused() {
        let spec = problems::heat(0.5).unwrap();
        let (lower, _) = fields(&spec);
        let family = AdversaryFamily::new(vec![AdversaryMember::OpenLoop(OpenLoopControl::constant("c", 0))]).unwrap();
        let mc = McConfig {
            n_paths: 20,
            steps: 10,
            seed: 3,
        };
        let report = dpp_check(
            &Sequential,
            &spec,
            &lower,
            0.0,
            &[0.0],
            &StoppingRule::start(),
            &[u_const(0)],
            &family,
            &mc,
        )
        .unwrap();
        assert_eq!(report.residual, 0.0);

        struct Peek;
        impl crate::strategies::PathRule for Peek {
            fn name(&self) -> String {
                "peek".into()
            }
            fn evaluate(&self, path: &PathView<'_>) -> usize {
                if path.is_complete() && path.state(path.last_index())[0] > 0.0 {
                    0
                } else {
                    path.horizon_index()
                }
            }
        }
        let peek = StoppingRule::Custom(alloc::sync::Arc::new(Peek));
        assert!(dpp_check(
            &Sequential,
            &spec,
            &lower,
            0.0,
            &[0.0],
            &peek,
            &[u_const(0)],
            &family,
            &mc
        )
        .is_err());
    }

    #[test]
    fn ignoring_extra_noise_gives_zero_delta() {
        let spec = problems::pennies(1.0).unwrap();
        let base = AdversaryFamily::new(vec![
            AdversaryMember::OpenLoop(OpenLoopControl::constant("c0", 0)),
            AdversaryMember::OpenLoop(OpenLoopControl::constant("c1", 1)),
        ])
        .unwrap();
        let enlarged = base.clone().with(AdversaryMember::OpenLoop(
            OpenLoopControl::constant("c1e", 1).with_info(InfoLevel::Enlarged),
        ));
        let mc = McConfig {
            n_paths: 200,
            steps: 16,
            seed: 5,
        };
        let report =
            filtration_experiment(&Sequential, &spec, 0.0, &[0.0], &u_const(0), &base, &enlarged, &mc).unwrap();
        assert_eq!(report.delta, 0.0);
        assert!(filtration_experiment(&Sequential, &spec, 0.0, &[0.0], &u_const(0), &enlarged, &base, &mc).is_err());
    }

    #[test]
    fn heat_delta_is_zero() {
        let spec = problems::heat_with(0.5, Payoff::Gaussian).unwrap();
        let enlarged = AdversaryFamily::new(vec![
            AdversaryMember::OpenLoop(OpenLoopControl::constant("c", 0)),
            AdversaryMember::OpenLoop(OpenLoopControl::new(
                "e",
                Generator::SignOfExtra {
                    coord: 0,
                    nonneg: 0,
                    neg: 0,
                },
            )),
        ])
        .unwrap();
        let base = enlarged.brownian_only().unwrap();
        let mc = McConfig {
            n_paths: 100,
            steps: 8,
            seed: 2,
        };
        let report =
            filtration_experiment(&Sequential, &spec, 0.0, &[0.0], &u_const(0), &base, &enlarged, &mc).unwrap();
        assert_eq!(report.delta, 0.0);
    }

    #[test]
    fn alpha_must_start_at_s() {
        let spec = problems::pennies(1.0).unwrap();
        let late = ElementaryStrategy::new(
            "late",
            ControlSetLabel::U,
            StoppingRule::FixedTime(0.5),
            Vec::new(),
            vec![crate::strategies::Action::Constant(0)],
        )
        .unwrap();
        let r = simulate_strong(
            &spec,
            0.0,
            &[0.0],
            &late,
            &OpenLoopControl::constant("c", 0),
            &noise(10, 1),
        );
        assert!(matches!(r, Err(Error::Interval { .. })));
    }
}
