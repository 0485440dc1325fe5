//! Benchmark problems selectable by id.

use robustctl_core::problems::{self, BenchmarkInfo, Payoff};
use robustctl_core::sde::ProblemSpec;

use crate::config::{PayoffConfig, RunConfig};

/// Closed-form value function `(t, x) ↦ v(t, x)`.
pub type Reference = Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

pub struct Problem {
    pub spec: ProblemSpec,
    pub info: BenchmarkInfo,
    pub reference: Option<Reference>,
}

pub fn default_horizon(id: &str) -> f64 {
    if id == "heat" {
        0.5
    } else {
        1.0
    }
}

fn payoff(cfg: Option<&PayoffConfig>, default: Payoff) -> Payoff {
    match cfg {
        None => default,
        Some(PayoffConfig::Gaussian) => Payoff::Gaussian,
        Some(PayoffConfig::Tanh { scale }) => Payoff::Tanh { scale: *scale },
        Some(PayoffConfig::Constant { value }) => Payoff::Constant(*value),
    }
}

/// Builds the configured problem; the error is a human-readable message.
pub fn build(cfg: &RunConfig) -> Result<Problem, String> {
    let id = cfg.problem.as_str();
    let info = problems::info(id).ok_or_else(|| {
        format!(
            "`problem`: unknown benchmark `{id}` (known: {})",
            problems::ids().join(", ")
        )
    })?;
    let horizon = cfg.horizon.unwrap_or_else(|| default_horizon(id));
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(format!("`horizon` = {horizon} must be positive and finite"));
    }
    if cfg.sigma.is_some() && id != "drift_control" {
        return Err(format!("`sigma` is not a parameter of `{id}`"));
    }
    let tanh = Payoff::Tanh { scale: 1.0 };
    let mut reference: Option<Reference> = None;
    let spec = match id {
        "constant" => {
            let c = match cfg.payoff {
                None => 1.0,
                Some(PayoffConfig::Constant { value }) => value,
                Some(_) => return Err("`payoff`: the constant problem takes a constant payoff".into()),
            };
            reference = Some(Box::new(move |_, _| c));
            problems::constant(horizon, c)
        }
        "heat" => {
            let g = payoff(cfg.payoff.as_ref(), Payoff::Gaussian);
            match g {
                Payoff::Gaussian => reference = Some(Box::new(move |t, x| problems::heat_reference(horizon, t, x))),
                Payoff::Constant(c) => reference = Some(Box::new(move |_, _| c)),
                _ => {}
            }
            problems::heat_with(horizon, g)
        }
        "pennies" => problems::pennies_with(horizon, payoff(cfg.payoff.as_ref(), tanh)),
        "drift_control" => {
            let sigma = cfg.sigma.unwrap_or(1.0);
            if !(sigma >= 0.0) {
                return Err("`sigma` must be non-negative".into());
            }
            problems::drift_control_full(horizon, sigma, payoff(cfg.payoff.as_ref(), tanh))
        }
        "growth_violator" => {
            if cfg.payoff.is_some() {
                return Err("`payoff` cannot be overridden for growth_violator".into());
            }
            problems::growth_violator(horizon)
        }
        _ => unreachable!(),
    }
    .map_err(|e| format!("`problem`: {e}"))?;
    if let Some(PayoffConfig::Tanh { scale }) | Some(PayoffConfig::Constant { value: scale }) = &cfg.payoff {
        if !scale.is_finite() {
            return Err("`payoff` parameters must be finite".into());
        }
    }
    Ok(Problem { spec, info, reference })
}
