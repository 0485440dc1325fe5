//! Experiment orchestration: assumption gate, PDE solve, Monte Carlo value,
//! dynamic programming and filtration checks.

use serde::Serialize;
use serde_json::{json, Map, Value};

use robustctl_core::exec::PathExecutor;
use robustctl_core::game::{
    default_adversary_family, dpp_check, estimate_value_function, filtration_experiment, grid_strategy_family,
    simulate_feedback_pair, simulate_strong, AdversaryFamily, AdversaryMember, FamilyOptions, McConfig,
    ValueFunctionEstimate,
};
use robustctl_core::hamiltonian::{hamiltonian_lower, hamiltonian_mixed, hamiltonian_upper, HamiltonianQuery, Side};
use robustctl_core::noise::{path_seed, sample_noise, TimeGrid};
use robustctl_core::pde::{compare_to_reference, solve_isaacs, SpaceTimeGrid, ValueField};
use robustctl_core::sde::{validate_assumptions, AssumptionCheck};
use robustctl_core::strategies::{ElementaryStrategy, StoppingRule};

use crate::config::{RuleConfig, RunConfig};
use crate::error::{CliError, EXIT_CHECK_FAILED, EXIT_PASS};
use crate::registry::{self, Problem};

pub const SCHEMA_VERSION: &str = "robustctl.summary/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    SolvePde,
    Simulate,
    Compare,
    DppCheck,
    HamiltonianReport,
    Run,
}

impl Command {
    fn stages(self) -> Stages {
        let (solve, value, dpp, filtration, hamiltonian) = match self {
            Command::Validate => (false, false, false, false, false),
            Command::SolvePde => (true, false, false, false, false),
            Command::Simulate => (true, true, false, false, false),
            Command::Compare => (true, true, false, true, false),
            Command::DppCheck => (true, false, true, false, false),
            Command::HamiltonianReport => (false, false, false, false, true),
            Command::Run => (true, true, true, true, true),
        };
        Stages {
            solve,
            value,
            dpp,
            filtration,
            hamiltonian,
        }
    }
}

struct Stages {
    solve: bool,
    value: bool,
    dpp: bool,
    filtration: bool,
    hamiltonian: bool,
}

/// One tolerance check of the summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

/// A CSV table destined for the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

/// Everything a command produced.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: Command,
    pub config: RunConfig,
    pub problem: Value,
    pub sections: Map<String, Value>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub error: Option<(String, String, i32)>,
    pub tables: Vec<Table>,
}

impl Report {
    /// Exit code under the `0 pass / 1 check failure / 2 config / 3 runtime` contract.
    pub fn exit_code(&self, strict: bool) -> i32 {
        if let Some((_, _, code)) = &self.error {
            return *code;
        }
        if self.passed(strict) {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILED
        }
    }

    pub fn passed(&self, strict: bool) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.pass) && !(strict && !self.warnings.is_empty())
    }

    /// The versioned summary; identical inputs give byte-identical output.
    pub fn summary(&self, strict: bool) -> Value {
        json!({
            "schema": SCHEMA_VERSION,
            "command": self.command,
            "strict": strict,
            "config": self.config,
            "problem": self.problem,
            "sections": self.sections,
            "checks": self.checks,
            "warnings": self.warnings,
            "pass": self.passed(strict),
            "error": self.error.as_ref().map(|(kind, message, _)| json!({"kind": kind, "message": message})),
        })
    }

    pub fn summary_text(&self, strict: bool) -> String {
        let mut text = serde_json::to_string_pretty(&self.summary(strict)).expect("summary serializes");
        text.push('\n');
        text
    }
}

struct State<'e, E: PathExecutor> {
    exec: &'e E,
    cfg: RunConfig,
    problem: Problem,
    x0: Vec<f64>,
    lower: Option<ValueField>,
    upper: Option<ValueField>,
    strategies: Vec<ElementaryStrategy>,
    family: Option<AdversaryFamily>,
    value: Option<ValueFunctionEstimate>,
    report: Report,
}

/// Runs a command on a validated configuration.
pub fn run_command<E: PathExecutor>(exec: &E, command: Command, cfg: RunConfig) -> Report {
    let mut report = Report {
        command,
        config: cfg.clone(),
        problem: Value::Null,
        sections: Map::new(),
        checks: Vec::new(),
        warnings: Vec::new(),
        error: None,
        tables: Vec::new(),
    };
    let problem = match registry::build(&cfg) {
        Ok(p) => p,
        Err(msg) => {
            report.error = Some(("config".into(), msg, crate::error::EXIT_CONFIG));
            return report;
        }
    };
    report.problem = json!({
        "id": problem.info.id,
        "dim": problem.spec.dim,
        "horizon": problem.spec.horizon,
        "isaacs_holds": problem.info.isaacs_holds,
        "concave_in_u": problem.info.concave_in_u,
        "has_reference": problem.reference.is_some(),
        "u": (0..problem.spec.u.len()).map(|i| problem.spec.u.point(i).to_vec()).collect::<Vec<_>>(),
        "v": (0..problem.spec.v.len()).map(|i| problem.spec.v.point(i).to_vec()).collect::<Vec<_>>(),
    });
    let x0 = cfg.x0(problem.spec.dim);
    let mut state = State {
        exec,
        cfg,
        problem,
        x0,
        lower: None,
        upper: None,
        strategies: Vec::new(),
        family: None,
        value: None,
        report,
    };
    if let Err(e) = state.pipeline(command.stages()) {
        state.report.error = Some((e.kind().into(), e.to_string(), e.exit_code()));
    }
    state.report
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn rule_of(rule: &RuleConfig) -> (String, StoppingRule) {
    match rule {
        RuleConfig::Start => ("start".into(), StoppingRule::start()),
        RuleConfig::Terminal => ("terminal".into(), StoppingRule::terminal()),
        RuleConfig::FixedTime(t) => (format!("fixed_time({t})"), StoppingRule::FixedTime(*t)),
        RuleConfig::ExitNorm(r) => (format!("exit_norm({r})"), StoppingRule::exit_norm(*r)),
    }
}

impl<E: PathExecutor> State<'_, E> {
    fn pipeline(&mut self, stages: Stages) -> Result<(), CliError> {
        if !self.assumptions()? {
            return Ok(());
        }
        if stages.hamiltonian {
            self.hamiltonian_report()?;
        }
        if stages.solve {
            self.solve(stages.value || stages.dpp || stages.filtration)?;
        }
        if stages.value || stages.filtration || stages.dpp {
            self.prepare_families()?;
        }
        if stages.value || stages.filtration {
            self.value()?;
        }
        if stages.dpp {
            self.dpp()?;
        }
        if stages.filtration {
            self.filtration()?;
        }
        Ok(())
    }

    fn mc(&self) -> McConfig {
        McConfig {
            n_paths: self.cfg.simulation.n_paths,
            steps: self.cfg.simulation.steps,
            seed: self.cfg.simulation.seed,
        }
    }

    /// Returns whether the pipeline may continue.
    fn assumptions(&mut self) -> Result<bool, CliError> {
        let a = &self.cfg.assumptions;
        let spec = &self.problem.spec;
        let check = AssumptionCheck {
            bounds: vec![(-a.radius, a.radius); spec.dim],
            samples: a.samples,
            lipschitz: self.problem.info.lipschitz,
            growth: self.problem.info.growth,
            slack: a.slack,
            seed: a.seed,
        };
        let rep = validate_assumptions(spec, &check)?;
        self.report.sections.insert(
            "assumptions".into(),
            json!({
                "gate": a.gate,
                "radius": rep.radius,
                "samples": rep.sample_count,
                "lipschitz_estimate": rep.lipschitz_estimate,
                "declared_lipschitz": rep.declared_lipschitz,
                "growth_estimate": rep.growth_estimate,
                "declared_growth": rep.declared_growth,
                "slack": rep.slack,
                "pass": rep.pass(),
            }),
        );
        if !a.gate {
            if !rep.pass() {
                self.report
                    .warnings
                    .push(format!("assumption check failed with the gate off: {rep}"));
            }
            return Ok(true);
        }
        self.report.checks.push(Check {
            name: "assumptions.lipschitz".into(),
            value: rep.lipschitz_estimate,
            tolerance: rep.declared_lipschitz * rep.slack,
            pass: rep.lipschitz_pass,
        });
        self.report.checks.push(Check {
            name: "assumptions.growth".into(),
            value: rep.growth_estimate,
            tolerance: rep.declared_growth * rep.slack,
            pass: rep.growth_pass,
        });
        Ok(rep.pass())
    }

    fn grid(&self) -> Result<SpaceTimeGrid, CliError> {
        let g = &self.cfg.grid;
        let spec = &self.problem.spec;
        let axis = SpaceTimeGrid::axis(-g.half_width, g.half_width, g.h)?;
        let axes = vec![axis; spec.dim];
        Ok(match g.dt {
            Some(dt) => SpaceTimeGrid::new(axes, spec.horizon, (spec.horizon / dt).round() as usize)?,
            None => SpaceTimeGrid::cfl_tight(spec, axes)?,
        })
    }

    fn solve(&mut self, need_lower: bool) -> Result<(), CliError> {
        let spec = &self.problem.spec;
        let grid = self.grid()?;
        let tol = self.cfg.tolerances.clone();
        let dt_max = robustctl_core::pde::cfl_max_dt(spec, grid.axes())?;
        let mut section = json!({
            "grid": {
                "half_width": self.cfg.grid.half_width,
                "h": grid.axes()[0].h,
                "nodes_per_axis": grid.axes()[0].count,
                "dt": grid.dt(),
                "steps": grid.steps(),
                "cfl_max_dt": dt_max,
                "cfl_ratio": grid.dt() / dt_max,
            }
        });
        let terminal: Vec<f64> = {
            let mut x = vec![0.0; spec.dim];
            (0..grid.nodes())
                .map(|n| {
                    grid.coords(n, &mut x);
                    spec.payoff(&x)
                })
                .collect::<Result<_, _>>()?
        };
        let g_min = terminal.iter().copied().fold(f64::INFINITY, f64::min);
        let g_max = terminal.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let sides = [
            (Side::Lower, self.cfg.solve.lower || need_lower),
            (Side::Upper, self.cfg.solve.upper),
        ];
        for (side, wanted) in sides {
            if !wanted {
                continue;
            }
            let field = solve_isaacs(spec, &grid, side)?;
            let label = if side == Side::Lower { "lower" } else { "upper" };
            let violation = field
                .values()
                .iter()
                .map(|v| (g_min - v).max(v - g_max))
                .fold(0.0f64, f64::max);
            self.report.checks.push(Check::at_most(
                format!("pde.{label}.max_principle"),
                violation,
                tol.max_principle,
            ));
            let mut entry = json!({
                "value_at_start": field.value_at(self.cfg.initial.s, &self.x0),
                "min": field.values().iter().copied().fold(f64::INFINITY, f64::min),
                "max": field.values().iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "max_update": field.max_update().iter().copied().fold(0.0f64, f64::max),
            });
            if let Some(reference) = &self.problem.reference {
                let r = tol.reference_region;
                let err = compare_to_reference(&field, reference.as_ref(), &|x: &[f64]| x.iter().all(|c| c.abs() <= r));
                entry["reference_error"] = json!({"sup": err.sup, "l2": err.l2, "rms": err.rms, "nodes": err.nodes});
                self.report.checks.push(Check::at_most(
                    format!("pde.{label}.reference_sup"),
                    err.sup,
                    tol.pde_sup,
                ));
            }
            section[label] = entry;
            self.report.tables.push(field_table(&field, label));
            match side {
                Side::Lower => self.lower = Some(field),
                Side::Upper => self.upper = Some(field),
            }
        }
        if let (Some(lower), Some(upper)) = (&self.lower, &self.upper) {
            let worst = lower
                .values()
                .iter()
                .zip(upper.values())
                .map(|(l, u)| l - u)
                .fold(f64::NEG_INFINITY, f64::max);
            self.report
                .checks
                .push(Check::at_most("pde.ordering", worst, tol.ordering));
            section["isaacs_gap_at_start"] =
                json!(upper.value_at(self.cfg.initial.s, &self.x0) - lower.value_at(self.cfg.initial.s, &self.x0));
        }
        self.report.sections.insert("pde".into(), section);
        Ok(())
    }

    fn prepare_families(&mut self) -> Result<(), CliError> {
        let lower = self
            .lower
            .as_ref()
            .ok_or_else(|| CliError::Runtime("the lower field is required".into()))?;
        let spec = &self.problem.spec;
        let s = self.cfg.initial.s;
        let steps = self.cfg.simulation.steps;
        self.strategies = grid_strategy_family(lower, s, spec.horizon, &self.cfg.strategies.decision_counts)?;
        for n in &self.cfg.strategies.decision_counts {
            if !steps.is_multiple_of(*n) {
                self.report.warnings.push(format!(
                    "decision times of grid_u_{n} do not fall on the {steps}-step simulation grid"
                ));
            }
        }
        let a = &self.cfg.adversaries;
        let options = FamilyOptions {
            piecewise_members: a.piecewise_members,
            piecewise_pieces: a.piecewise_pieces,
            key: a.key,
            include_enlarged: a.enlarged,
        };
        let family = default_adversary_family(spec, s, a.pde_feedback.then_some(lower), steps, &options)?;
        self.report.sections.insert(
            "families".into(),
            json!({
                "strategies": self.strategies.iter().map(|a| a.name()).collect::<Vec<_>>(),
                "adversaries": family.members().iter().map(|m| json!({
                    "id": m.id(),
                    "kind": match m { AdversaryMember::OpenLoop(_) => "open_loop", AdversaryMember::Feedback(_) => "feedback" },
                    "info": format!("{:?}", m.info_level()),
                })).collect::<Vec<_>>(),
            }),
        );
        self.family = Some(family);
        Ok(())
    }

    fn value(&mut self) -> Result<(), CliError> {
        let spec = &self.problem.spec;
        let family = self.family.as_ref().expect("families prepared");
        let lower = self.lower.as_ref().expect("lower field solved");
        let s = self.cfg.initial.s;
        let tol = self.cfg.tolerances.clone();
        let mc = self.mc();
        let est = estimate_value_function(self.exec, spec, s, &self.x0, &self.strategies, family, &mc)?;
        let field_value = lower.value_at(s, &self.x0);
        let v = &est.value;

        self.report.checks.push(Check::at_most(
            "value.vs_lower_field",
            (v.mean - field_value).abs(),
            (tol.value_se * v.std_error).max(tol.value_abs),
        ));
        if let Some(reference) = &self.problem.reference {
            self.report.checks.push(Check::at_most(
                "value.vs_reference",
                (v.mean - reference(s, &self.x0)).abs(),
                tol.reference_se * v.std_error + tol.reference_abs,
            ));
        }
        let mut order: Vec<usize> = (0..self.strategies.len()).collect();
        order.sort_by_key(|&k| self.cfg.strategies.decision_counts[k]);
        for w in order.windows(2) {
            let (a, b) = (&est.per_strategy[w[0]].estimate, &est.per_strategy[w[1]].estimate);
            self.report.checks.push(Check::at_most(
                format!("value.trend.{}->{}", a.strategy, b.strategy),
                a.mean - b.mean,
                tol.trend_se * a.std_error.max(b.std_error),
            ));
        }
        let pairs: Vec<Value> = (0..est.table.strategies.len())
            .flat_map(|i| (0..est.table.adversaries.len()).map(move |j| (i, j)))
            .map(|(i, j)| {
                let e = est.table.estimate(i, j);
                json!({"strategy": e.strategy, "adversary": e.adversary, "mean": e.mean, "std_error": e.std_error})
            })
            .collect();
        self.report.sections.insert(
            "value".into(),
            json!({
                "estimate": v.mean,
                "std_error": v.std_error,
                "n_paths": v.n_paths,
                "steps": mc.steps,
                "seed": v.seed,
                "best_strategy": est.best_strategy,
                "worst_adversary": est.worst_adversary,
                "lower_field": field_value,
                "reference": self.problem.reference.as_ref().map(|r| r(s, &self.x0)),
                "per_strategy": est.per_strategy.iter().map(|r| json!({
                    "strategy": r.estimate.strategy,
                    "robust_value": r.estimate.mean,
                    "std_error": r.estimate.std_error,
                    "worst_adversary": r.worst,
                })).collect::<Vec<_>>(),
                "pairs": pairs,
                "bias": "max over a finite strategy family (low) of min over a finite adversary family (high)",
            }),
        );
        if self.cfg.simulation.paths_csv > 0 {
            let best = self
                .strategies
                .iter()
                .find(|a| a.name() == est.best_strategy)
                .expect("best strategy is in the family");
            let member = family
                .members()
                .iter()
                .find(|m| m.id() == est.worst_adversary)
                .expect("worst adversary is in the family");
            let table = self.paths_table(best, member)?;
            self.report.tables.push(table);
        }
        self.value = Some(est);
        Ok(())
    }

    fn paths_table(&self, alpha: &ElementaryStrategy, member: &AdversaryMember) -> Result<Table, CliError> {
        let spec = &self.problem.spec;
        let s = self.cfg.initial.s;
        let mc = self.mc();
        let grid = TimeGrid::uniform(s, spec.horizon, mc.steps)?;
        let family = self.family.as_ref().expect("families prepared");
        let dim_extra = usize::from(family.needs_extra_noise());
        let mut header = vec!["path", "seed", "i", "t"];
        let xs: Vec<String> = (0..spec.dim).map(|k| format!("x{k}")).collect();
        header.extend(xs.iter().map(String::as_str));
        header.extend(["u", "v"]);
        let mut table = Table::new("paths.csv", &header);
        for p in 0..self.cfg.simulation.paths_csv.min(mc.n_paths) {
            let seed = path_seed(mc.seed, p as u64);
            let noise = sample_noise(&grid, seed, spec.dim_w, dim_extra);
            let traj = match member {
                AdversaryMember::OpenLoop(c) => simulate_strong(spec, s, &self.x0, alpha, c, &noise)?,
                AdversaryMember::Feedback(b) => simulate_feedback_pair(spec, s, &self.x0, alpha, b, &noise)?,
            };
            for i in 0..=traj.stopped_at {
                let mut row = vec![p.to_string(), seed.to_string(), i.to_string(), fmt(traj.times[i])];
                row.extend(traj.state(i).iter().map(|c| fmt(*c)));
                row.push(traj.u.get(i).map_or(String::new(), |u| u.to_string()));
                row.push(traj.v.get(i).map_or(String::new(), |v| v.to_string()));
                table.rows.push(row);
            }
        }
        Ok(table)
    }

    fn dpp(&mut self) -> Result<(), CliError> {
        let spec = &self.problem.spec;
        let family = self.family.as_ref().expect("families prepared");
        let lower = self.lower.as_ref().expect("lower field solved");
        let tol = self.cfg.tolerances.clone();
        let mc = self.mc();
        let mut entries = Vec::new();
        for rule in &self.cfg.dpp.rules {
            let (label, rho) = rule_of(rule);
            let rep = dpp_check(
                self.exec,
                spec,
                lower,
                self.cfg.initial.s,
                &self.x0,
                &rho,
                &self.strategies,
                family,
                &mc,
            )?;
            self.report.checks.push(Check::at_most(
                format!("dpp.{label}"),
                rep.residual,
                (tol.dpp_se * rep.std_error).max(tol.dpp_abs),
            ));
            entries.push(json!({
                "rule": label,
                "field_value": rep.field_value,
                "estimate": rep.dpp.value.mean,
                "std_error": rep.std_error,
                "residual": rep.residual,
                "best_strategy": rep.dpp.best_strategy,
                "worst_adversary": rep.dpp.worst_adversary,
            }));
        }
        self.report.sections.insert("dpp".into(), Value::Array(entries));
        Ok(())
    }

    fn filtration(&mut self) -> Result<(), CliError> {
        let family = self.family.as_ref().expect("families prepared");
        if !self.cfg.filtration.enabled || !family.needs_extra_noise() {
            return Ok(());
        }
        let spec = &self.problem.spec;
        let est = self.value.as_ref().expect("value stage ran");
        let alpha = self
            .strategies
            .iter()
            .find(|a| a.name() == est.best_strategy)
            .expect("best strategy is in the family");
        let base = family.brownian_only()?;
        let tol = self.cfg.tolerances.clone();
        let rep = filtration_experiment(
            self.exec,
            spec,
            self.cfg.initial.s,
            &self.x0,
            alpha,
            &base,
            family,
            &self.mc(),
        )?;
        self.report.checks.push(Check::at_most(
            "filtration.delta",
            rep.delta.abs(),
            (tol.filtration_se * rep.se_combined).max(tol.filtration_abs),
        ));
        self.report
            .checks
            .push(Check::at_most("filtration.enlarged_not_above_base", -rep.delta, 0.0));
        self.report.sections.insert(
            "filtration".into(),
            json!({
                "strategy": alpha.name(),
                "base": rep.base.estimate.mean,
                "base_se": rep.base.estimate.std_error,
                "base_worst": rep.base.worst,
                "enlarged": rep.enlarged.estimate.mean,
                "enlarged_se": rep.enlarged.estimate.std_error,
                "enlarged_worst": rep.enlarged.worst,
                "delta": rep.delta,
                "se_combined": rep.se_combined,
                "se_paired": rep.se_paired,
            }),
        );
        Ok(())
    }

    fn hamiltonian_report(&mut self) -> Result<(), CliError> {
        let spec = &self.problem.spec;
        let d = spec.dim;
        let t = self.cfg.initial.s;
        let hw = self.cfg.grid.half_width;
        let mut table = Table::new(
            "hamiltonian.csv",
            &["t", "x", "p", "M", "H_lower", "H_mix", "H_upper", "gap"],
        );
        let mut worst_order = 0.0f64;
        let mut max_gap = 0.0f64;
        let mut queries = 0usize;
        for k in 0..9 {
            let x = -hw + 2.0 * hw * k as f64 / 8.0;
            for p in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
                for m in [-1.0, 0.0, 1.0] {
                    let mut mm = vec![0.0; d * d];
                    for i in 0..d {
                        mm[i * d + i] = m;
                    }
                    let q = HamiltonianQuery::new(t, vec![x; d], vec![p; d], mm)?;
                    let lo = hamiltonian_lower(spec, &q)?.value;
                    let up = hamiltonian_upper(spec, &q)?.value;
                    let mix = hamiltonian_mixed(spec, &q)?.value;
                    worst_order = worst_order.max(lo - mix).max(mix - up);
                    max_gap = max_gap.max(up - lo);
                    queries += 1;
                    table
                        .rows
                        .push([t, x, p, m, lo, mix, up, up - lo].iter().map(|v| fmt(*v)).collect());
                }
            }
        }
        self.report
            .checks
            .push(Check::at_most("hamiltonian.ordering", worst_order, 1e-8));
        self.report.sections.insert(
            "hamiltonian".into(),
            json!({"queries": queries, "max_isaacs_gap": max_gap, "max_order_violation": worst_order}),
        );
        self.report.tables.push(table);
        Ok(())
    }
}

fn field_table(field: &ValueField, label: &str) -> Table {
    let grid = field.grid();
    let d = grid.dim();
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|k| format!("x{k}")));
    header.extend(["value", "u_feedback", "v_feedback"].map(String::from));
    let mut table = Table {
        file: format!("field_{label}.csv"),
        header,
        rows: Vec::new(),
    };
    let mut x = vec![0.0; d];
    for layer in 0..=grid.steps() {
        let t = grid.time(layer);
        for node in 0..grid.nodes() {
            grid.coords(node, &mut x);
            let mut row = vec![fmt(t)];
            row.extend(x.iter().map(|c| fmt(*c)));
            row.push(fmt(field.value(layer, node)));
            if layer < grid.steps() {
                row.push(field.feedback_u().at(layer, node).to_string());
                row.push(field.feedback_v().at(layer, node).to_string());
            } else {
                row.extend([String::new(), String::new()]);
            }
            table.rows.push(row);
        }
    }
    table
}

/// Writes `summary.json` and every table into `dir`.
pub fn emit_report(report: &Report, dir: &std::path::Path, strict: bool) -> Result<Vec<std::path::PathBuf>, CliError> {
    let io = |path: &std::path::Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    let summary = dir.join("summary.json");
    std::fs::write(&summary, report.summary_text(strict)).map_err(io(&summary))?;
    written.push(summary);
    for table in &report.tables {
        let path = dir.join(&table.file);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io {
            path: path.clone(),
            source: e.into(),
        })?;
        let csv_err = |e: csv::Error| CliError::Io {
            path: path.clone(),
            source: e.into(),
        };
        w.write_record(&table.header).map_err(csv_err)?;
        for row in &table.rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
