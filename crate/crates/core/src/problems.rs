//! Built-in benchmark problems.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::Result;
use crate::sde::{Coefficients, ControlSet, ProblemSpec};

/// Terminal payoffs used by the benchmark library.
#[derive(Debug, Clone, PartialEq)]
pub enum Payoff {
    Constant(f64),
    /// `exp(-|x|²)`
    Gaussian,
    /// `tanh(scale · x_0)`
    Tanh {
        scale: f64,
    },
    /// `inner(x) + shift`
    Shifted {
        inner: Box<Payoff>,
        shift: f64,
    },
}

impl Payoff {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Payoff::Constant(c) => *c,
            Payoff::Gaussian => libm::exp(-x.iter().map(|c| c * c).sum::<f64>()),
            Payoff::Tanh { scale } => libm::tanh(scale * x[0]),
            Payoff::Shifted { inner, shift } => inner.eval(x) + shift,
        }
    }

    /// Supremum norm of the payoff.
    pub fn bound(&self) -> f64 {
        match self {
            Payoff::Constant(c) => libm::fabs(*c),
            Payoff::Gaussian | Payoff::Tanh { .. } => 1.0,
            Payoff::Shifted { inner, shift } => inner.bound() + libm::fabs(*shift),
        }
    }
}

type DriftFn = Box<dyn Fn(f64, &[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Closure-backed coefficients.
pub struct ClosureModel {
    drift: DriftFn,
    diffusion: DriftFn,
    payoff: Payoff,
}

impl ClosureModel {
    pub fn new(drift: DriftFn, diffusion: DriftFn, payoff: Payoff) -> Self {
        Self {
            drift,
            diffusion,
            payoff,
        }
    }
}

impl Coefficients for ClosureModel {
    fn drift(&self, t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, u, v, out)
    }
    fn diffusion(&self, t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, u, v, out)
    }
    fn payoff(&self, x: &[f64]) -> f64 {
        self.payoff.eval(x)
    }
}

fn constant_diffusion(sigma: f64) -> DriftFn {
    Box::new(move |_, _, _, _, out| out.fill(sigma))
}

fn zero_drift() -> DriftFn {
    Box::new(|_, _, _, _, out| out.fill(0.0))
}

fn scalar_spec(
    id: &str,
    horizon: f64,
    drift: DriftFn,
    diffusion: DriftFn,
    payoff: Payoff,
    u: &[f64],
    v: &[f64],
) -> Result<ProblemSpec> {
    let bound = payoff.bound();
    ProblemSpec::new(
        id,
        1,
        1,
        horizon,
        bound,
        Arc::new(ClosureModel::new(drift, diffusion, payoff)),
        ControlSet::scalar("U", u)?,
        ControlSet::scalar("V", v)?,
    )
}

/// `b = 0`, `σ = 1`, `g ≡ c`, singleton control sets.
pub fn constant(horizon: f64, c: f64) -> Result<ProblemSpec> {
    scalar_spec(
        "constant",
        horizon,
        zero_drift(),
        constant_diffusion(1.0),
        Payoff::Constant(c),
        &[0.0],
        &[0.0],
    )
}

/// `b = 0`, `σ = √2`, `g = exp(-x²)`.
pub fn heat(horizon: f64) -> Result<ProblemSpec> {
    heat_with(horizon, Payoff::Gaussian)
}

pub fn heat_with(horizon: f64, payoff: Payoff) -> Result<ProblemSpec> {
    scalar_spec(
        "heat",
        horizon,
        zero_drift(),
        constant_diffusion(core::f64::consts::SQRT_2),
        payoff,
        &[0.0],
        &[0.0],
    )
}

/// Closed-form solution of the heat benchmark, `E[g(x + √2 W_{T-t})]`.
pub fn heat_reference(horizon: f64, t: f64, x: &[f64]) -> f64 {
    let s = 1.0 + 4.0 * (horizon - t);
    libm::exp(-x[0] * x[0] / s) / libm::sqrt(s)
}

/// Matching pennies in the drift: `b = u·v`, `σ = 1`, `U = V = {-1, +1}`, `g = tanh`.
pub fn pennies(horizon: f64) -> Result<ProblemSpec> {
    pennies_with(horizon, Payoff::Tanh { scale: 1.0 })
}

pub fn pennies_with(horizon: f64, payoff: Payoff) -> Result<ProblemSpec> {
    scalar_spec(
        "pennies",
        horizon,
        Box::new(|_, _, u, v, out| out[0] = u[0] * v[0]),
        constant_diffusion(1.0),
        payoff,
        &[-1.0, 1.0],
        &[-1.0, 1.0],
    )
}

/// `b = u + v`, `σ = 1`, `U = {-1, 0, 1}`, `V = {-½, 0, ½}`, `g = tanh`.
pub fn drift_control(horizon: f64) -> Result<ProblemSpec> {
    drift_control_full(horizon, 1.0, Payoff::Tanh { scale: 1.0 })
}

pub fn drift_control_with(horizon: f64, sigma: f64) -> Result<ProblemSpec> {
    drift_control_full(horizon, sigma, Payoff::Tanh { scale: 1.0 })
}

pub fn drift_control_full(horizon: f64, sigma: f64, payoff: Payoff) -> Result<ProblemSpec> {
    scalar_spec(
        "drift_control",
        horizon,
        Box::new(|_, _, u, v, out| out[0] = u[0] + v[0]),
        constant_diffusion(sigma),
        payoff,
        &[-1.0, 0.0, 1.0],
        &[-0.5, 0.0, 0.5],
    )
}

/// `b = x²`, `σ = 1`: breaks linear growth. Negative-test fixture.
pub fn growth_violator(horizon: f64) -> Result<ProblemSpec> {
    scalar_spec(
        "growth_violator",
        horizon,
        Box::new(|_, x, _, _, out| out[0] = x[0] * x[0]),
        constant_diffusion(1.0),
        Payoff::Tanh { scale: 1.0 },
        &[0.0],
        &[0.0],
    )
}

/// `b = 0`, `σ = 0`: the state never moves.
pub fn frozen(horizon: f64) -> Result<ProblemSpec> {
    scalar_spec(
        "frozen",
        horizon,
        zero_drift(),
        constant_diffusion(0.0),
        Payoff::Tanh { scale: 1.0 },
        &[0.0],
        &[0.0],
    )
}

/// Static facts about a benchmark problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkInfo {
    pub id: &'static str,
    /// `H⁻ = H⁺` holds on the discretized sets.
    pub isaacs_holds: bool,
    /// `u ↦ L` is concave and `U` discretizes a convex set, so `H^mix = H⁻`.
    pub concave_in_u: bool,
    pub has_reference: bool,
    /// Declared Lipschitz constant of `b, σ` on the default sampling box.
    pub lipschitz: f64,
    /// Declared linear growth constant.
    pub growth: f64,
    /// Whether the problem is expected to pass the assumption gate.
    pub satisfies_assumptions: bool,
}

pub const BENCHMARK_IDS: [&str; 5] = ["constant", "heat", "pennies", "drift_control", "growth_violator"];

pub fn info(id: &str) -> Option<BenchmarkInfo> {
    let (isaacs_holds, concave_in_u, has_reference, lipschitz, growth, ok) = match id {
        "constant" => (true, true, true, 0.0, 1.0, true),
        "heat" => (true, true, true, 0.0, 2.0, true),
        "pennies" => (false, false, false, 0.0, 2.0, true),
        "drift_control" => (true, true, false, 0.0, 2.5, true),
        "growth_violator" => (true, true, false, 20.0, 1.0, false),
        _ => return None,
    };
    let id = BENCHMARK_IDS.iter().copied().find(|b| *b == id)?;
    Some(BenchmarkInfo {
        id,
        isaacs_holds,
        concave_in_u,
        has_reference,
        lipschitz,
        growth,
        satisfies_assumptions: ok,
    })
}

/// Builds a benchmark by id with its default payoff.
pub fn build(id: &str, horizon: f64) -> Option<Result<ProblemSpec>> {
    Some(match id {
        "constant" => constant(horizon, 1.0),
        "heat" => heat(horizon),
        "pennies" => pennies(horizon),
        "drift_control" => drift_control(horizon),
        "growth_violator" => growth_violator(horizon),
        _ => return None,
    })
}

/// Ids of all built-in problems.
pub fn ids() -> Vec<String> {
    BENCHMARK_IDS.iter().map(|s| String::from(*s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{validate_assumptions, AssumptionCheck};
    use alloc::vec;

    #[test]
    fn library_problems_match_their_assumption_flags() {
        for id in BENCHMARK_IDS {
            let spec = build(id, 1.0).unwrap().unwrap();
            let meta = info(id).unwrap();
            let report = validate_assumptions(
                &spec,
                &AssumptionCheck {
                    bounds: vec![(-10.0, 10.0)],
                    samples: 4000,
                    lipschitz: meta.lipschitz,
                    growth: meta.growth,
                    slack: 0.01,
                    seed: 1,
                },
            )
            .unwrap();
            assert_eq!(report.pass(), meta.satisfies_assumptions, "{id}: {report}");
        }
    }

    #[test]
    fn heat_reference_terminal_layer_is_payoff() {
        for x in [-2.0, 0.0, 0.5] {
            assert!((heat_reference(0.5, 0.5, &[x]) - libm::exp(-x * x)).abs() < 1e-15);
        }
        assert!((heat_reference(0.5, 0.0, &[0.0]) - 1.0 / libm::sqrt(3.0)).abs() < 1e-15);
    }

    #[test]
    fn payoffs_respect_bounds() {
        let p = Payoff::Shifted {
            inner: Box::new(Payoff::Tanh { scale: 2.0 }),
            shift: 0.5,
        };
        assert_eq!(p.bound(), 1.5);
        assert!(p.eval(&[100.0]) <= p.bound());
        assert_eq!(vec![Payoff::Constant(-2.0).bound()], vec![2.0]);
    }
}
