//! Run configuration: JSON schema, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use robustctl_core::pde::{cfl_max_dt, SpaceTimeGrid};

use crate::error::CliError;
use crate::registry;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Benchmark id.
    pub problem: String,
    /// Terminal time; the benchmark default when absent.
    #[serde(alias = "T")]
    pub horizon: Option<f64>,
    /// Diffusion level, for problems that take one.
    pub sigma: Option<f64>,
    pub payoff: Option<PayoffConfig>,
    pub initial: InitialConfig,
    pub grid: GridConfig,
    pub solve: SolveConfig,
    pub simulation: SimulationConfig,
    pub strategies: StrategyConfig,
    pub adversaries: AdversaryConfig,
    pub dpp: DppConfig,
    pub filtration: FiltrationConfig,
    pub tolerances: Tolerances,
    pub assumptions: AssumptionConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffConfig {
    Gaussian,
    Tanh { scale: f64 },
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub s: f64,
    /// Zero of the right dimension when absent.
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// The box is `[-half_width, half_width]^d`.
    pub half_width: f64,
    pub h: f64,
    /// CFL-tight when absent.
    pub dt: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: 6.0,
            h: 0.05,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub lower: bool,
    pub upper: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            lower: true,
            upper: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n_paths: usize,
    /// Euler steps on `[s, T]`.
    pub steps: usize,
    pub seed: u64,
    /// Number of paths of the optimizing pair written to `paths.csv`.
    pub paths_csv: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_paths: 20_000,
            steps: 128,
            seed: 0,
            paths_csv: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    /// Decision-time counts of the lower-field grid feedback strategies.
    pub decision_counts: Vec<usize>,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            decision_counts: vec![2, 4, 8, 16],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdversaryConfig {
    pub piecewise_members: usize,
    pub piecewise_pieces: usize,
    pub key: u64,
    /// Add the worst-case `V` feedback of the lower field.
    pub pde_feedback: bool,
    /// Add members adapted to the auxiliary noise.
    pub enlarged: bool,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            piecewise_members: 4,
            piecewise_pieces: 8,
            key: 0x5eed_ad7e,
            pde_feedback: true,
            enlarged: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleConfig {
    Start,
    Terminal,
    FixedTime(f64),
    /// First time `|x| >= radius`.
    ExitNorm(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DppConfig {
    pub rules: Vec<RuleConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiltrationConfig {
    pub enabled: bool,
}

impl Default for FiltrationConfig {
    fn default() -> Self {
        Self { enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Sup-norm PDE error against a closed form.
    pub pde_sup: f64,
    /// Half-width of the cube on which PDE accuracy is claimed.
    pub reference_region: f64,
    pub max_principle: f64,
    pub ordering: f64,
    /// `|V̂ − field| <= max(value_se · SE, value_abs)`.
    pub value_se: f64,
    pub value_abs: f64,
    /// `|V̂ − reference| <= reference_se · SE + reference_abs`.
    pub reference_se: f64,
    pub reference_abs: f64,
    /// Allowed decrease of `V̂` between consecutive decision counts, in SE.
    pub trend_se: f64,
    pub dpp_se: f64,
    pub dpp_abs: f64,
    pub filtration_se: f64,
    pub filtration_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pde_sup: 1e-2,
            reference_region: 3.0,
            max_principle: 1e-8,
            ordering: 1e-10,
            value_se: 3.0,
            value_abs: 0.03,
            reference_se: 3.0,
            reference_abs: 5e-3,
            trend_se: 1.0,
            dpp_se: 3.0,
            dpp_abs: 2e-2,
            filtration_se: 3.0,
            filtration_abs: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssumptionConfig {
    /// Stop before any computation if the sampled constants exceed the declared ones.
    pub gate: bool,
    pub radius: f64,
    pub samples: usize,
    pub slack: f64,
    pub seed: u64,
}

impl Default for AssumptionConfig {
    fn default() -> Self {
        Self {
            gate: true,
            radius: 10.0,
            samples: 2000,
            slack: 1.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("robustctl-out"),
        }
    }
}

/// Allowed keys per object, for reporting every unknown key at once.
enum Schema {
    Object(&'static [(&'static str, Schema)]),
    Leaf,
}

use Schema::{Leaf, Object};

const SCHEMA: Schema = Object(&[
    ("problem", Leaf),
    ("horizon", Leaf),
    ("T", Leaf),
    ("sigma", Leaf),
    ("payoff", Leaf),
    ("initial", Object(&[("s", Leaf), ("x", Leaf)])),
    ("grid", Object(&[("half_width", Leaf), ("h", Leaf), ("dt", Leaf)])),
    ("solve", Object(&[("lower", Leaf), ("upper", Leaf)])),
    (
        "simulation",
        Object(&[("n_paths", Leaf), ("steps", Leaf), ("seed", Leaf), ("paths_csv", Leaf)]),
    ),
    ("strategies", Object(&[("decision_counts", Leaf)])),
    (
        "adversaries",
        Object(&[
            ("piecewise_members", Leaf),
            ("piecewise_pieces", Leaf),
            ("key", Leaf),
            ("pde_feedback", Leaf),
            ("enlarged", Leaf),
        ]),
    ),
    ("dpp", Object(&[("rules", Leaf)])),
    ("filtration", Object(&[("enabled", Leaf)])),
    (
        "tolerances",
        Object(&[
            ("pde_sup", Leaf),
            ("reference_region", Leaf),
            ("max_principle", Leaf),
            ("ordering", Leaf),
            ("value_se", Leaf),
            ("value_abs", Leaf),
            ("reference_se", Leaf),
            ("reference_abs", Leaf),
            ("trend_se", Leaf),
            ("dpp_se", Leaf),
            ("dpp_abs", Leaf),
            ("filtration_se", Leaf),
            ("filtration_abs", Leaf),
        ]),
    ),
    (
        "assumptions",
        Object(&[
            ("gate", Leaf),
            ("radius", Leaf),
            ("samples", Leaf),
            ("slack", Leaf),
            ("seed", Leaf),
        ]),
    ),
    ("output", Object(&[("dir", Leaf)])),
]);

fn unknown_keys(value: &Value, schema: &Schema, path: &str, out: &mut Vec<String>) {
    let (Value::Object(map), Object(fields)) = (value, schema) else {
        return;
    };
    for (key, child) in map {
        let here = if path.is_empty() {
            key.clone()
        } else {
            format!("{path}.{key}")
        };
        match fields.iter().find(|(name, _)| name == key) {
            Some((_, sub)) => unknown_keys(child, sub, &here, out),
            None => out.push(format!("unknown key `{here}`")),
        }
    }
}

/// Parses and validates a configuration held in memory.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        CliError::Config(vec![format!(
            "parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        )])
    })?;
    let mut errors = Vec::new();
    if !value.is_object() {
        return Err(CliError::Config(vec!["configuration must be a JSON object".into()]));
    }
    unknown_keys(&value, &SCHEMA, "", &mut errors);
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(value)
        .map_err(|e| CliError::Config(vec![format!("`{}`: {}", e.path(), e.inner())]))?;
    let errors = validate(&cfg);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(errors))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text)
}

/// Every semantic problem with a schema-valid configuration.
pub fn validate(cfg: &RunConfig) -> Vec<String> {
    let mut errors = Vec::new();
    let spec = match registry::build(cfg) {
        Ok(p) => Some(p.spec),
        Err(e) => {
            errors.push(e);
            None
        }
    };
    let horizon = spec.as_ref().map_or(1.0, |s| s.horizon);
    if !(cfg.initial.s >= 0.0 && cfg.initial.s < horizon) {
        errors.push(format!("`initial.s` = {} must lie in [0, {horizon})", cfg.initial.s));
    }
    if let (Some(x), Some(spec)) = (&cfg.initial.x, &spec) {
        if x.len() != spec.dim {
            errors.push(format!(
                "`initial.x` has {} entries, the problem has dimension {}",
                x.len(),
                spec.dim
            ));
        }
    }
    if !(cfg.grid.half_width > 0.0) || !(cfg.grid.h > 0.0) || cfg.grid.h >= 2.0 * cfg.grid.half_width {
        errors.push("`grid` needs half_width > 0 and 0 < h < 2·half_width".into());
    } else if let (Some(dt), Some(spec)) = (cfg.grid.dt, &spec) {
        if !(dt > 0.0) {
            errors.push("`grid.dt` must be positive".into());
        } else if let Ok(axis) = SpaceTimeGrid::axis(-cfg.grid.half_width, cfg.grid.half_width, cfg.grid.h) {
            match cfl_max_dt(spec, &vec![axis; spec.dim]) {
                Ok(bound) if dt > bound * (1.0 + 1e-12) => {
                    errors.push(format!("`grid.dt` = {dt} exceeds the CFL bound cfl_max_dt = {bound}"))
                }
                Err(e) => errors.push(format!("`grid`: {e}")),
                _ => {}
            }
            let steps = horizon / dt;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                errors.push(format!("`grid.dt` = {dt} does not divide the horizon {horizon}"));
            }
        }
    }
    if cfg.simulation.n_paths < 2 {
        errors.push("`simulation.n_paths` must be at least 2".into());
    }
    if cfg.simulation.steps == 0 {
        errors.push("`simulation.steps` must be positive".into());
    }
    if cfg.strategies.decision_counts.is_empty() || cfg.strategies.decision_counts.contains(&0) {
        errors.push("`strategies.decision_counts` must be a non-empty list of positive counts".into());
    }
    if cfg.adversaries.piecewise_members > 0 && cfg.adversaries.piecewise_pieces == 0 {
        errors.push("`adversaries.piecewise_pieces` must be positive".into());
    }
    for (k, rule) in cfg.dpp.rules.iter().enumerate() {
        match rule {
            RuleConfig::FixedTime(t) if !(*t >= cfg.initial.s && *t <= horizon) => {
                errors.push(format!("`dpp.rules[{k}]`: fixed time {t} outside [s, T]"))
            }
            RuleConfig::ExitNorm(r) if !(*r > 0.0) => {
                errors.push(format!("`dpp.rules[{k}]`: exit radius must be positive"))
            }
            _ => {}
        }
    }
    let t = &cfg.tolerances;
    let all = [
        t.pde_sup,
        t.reference_region,
        t.max_principle,
        t.ordering,
        t.value_se,
        t.value_abs,
        t.reference_se,
        t.reference_abs,
        t.trend_se,
        t.dpp_se,
        t.dpp_abs,
        t.filtration_se,
        t.filtration_abs,
    ];
    if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        errors.push("`tolerances` must be finite and non-negative".into());
    }
    if !(cfg.assumptions.radius > 0.0) || cfg.assumptions.samples == 0 || !(cfg.assumptions.slack >= 1.0) {
        errors.push("`assumptions` needs radius > 0, samples > 0 and slack >= 1".into());
    }
    errors
}

impl RunConfig {
    /// The initial state with its default filled in.
    pub fn x0(&self, dim: usize) -> Vec<f64> {
        self.initial.x.clone().unwrap_or_else(|| vec![0.0; dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"problem": "heat", "T": 0.5}"#).unwrap();
        assert_eq!(cfg.horizon, Some(0.5));
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.strategies.decision_counts, vec![2, 4, 8, 16]);
    }

    #[test]
    fn all_unknown_keys_are_reported() {
        let err = parse_config(r#"{"problem": "heat", "strategys": {}, "grid": {"hh": 1}}"#).unwrap_err();
        let CliError::Config(msgs) = err else { panic!("{err}") };
        assert_eq!(msgs.len(), 2);
        assert!(msgs.iter().any(|m| m.contains("strategys")));
        assert!(msgs.iter().any(|m| m.contains("grid.hh")));
    }

    #[test]
    fn cfl_violation_is_a_validation_error() {
        let err = parse_config(r#"{"problem": "heat", "grid": {"h": 0.1, "dt": 0.01}}"#).unwrap_err();
        let CliError::Config(msgs) = err else { panic!() };
        assert!(msgs.iter().any(|m| m.contains("cfl_max_dt = 0.005")), "{msgs:?}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_config("{\n  \"problem\": }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn type_errors_name_the_path() {
        let err = parse_config(r#"{"problem": "heat", "simulation": {"n_paths": "many"}}"#).unwrap_err();
        assert!(err.to_string().contains("simulation.n_paths"), "{err}");
    }

    #[test]
    fn unknown_problem() {
        assert!(parse_config(r#"{"problem": "nope"}"#).is_err());
    }

    #[test]
    fn config_round_trips() {
        let cfg =
            parse_config(r#"{"problem": "pennies", "dpp": {"rules": [{"fixed_time": 0.5}, "terminal"]}}"#).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
