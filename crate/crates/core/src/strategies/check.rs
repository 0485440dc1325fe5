use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::elementary::ElementaryStrategy;
use super::open_loop::{realize_open_loop, OpenLoopControl};
use super::path::PathView;
use super::rules::StoppingRule;
use crate::noise::{self, sample_noise, NoisePath, TimeGrid};
use crate::sde::ControlSet;

/// Objects whose decisions can be tested for non-anticipativity.
#[derive(Debug, Clone, Copy)]
pub enum Checkable<'a> {
    Rule(&'a StoppingRule),
    Strategy(&'a ElementaryStrategy),
    OpenLoop {
        control: &'a OpenLoopControl,
        v: &'a ControlSet,
    },
}

/// Shape of the random path pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPairConfig {
    pub steps: usize,
    pub horizon: f64,
    pub x0: Vec<f64>,
    /// Paths are `x0 + scale · W`.
    pub scale: f64,
    pub dim_w: usize,
    pub dim_extra: usize,
}

impl Default for PathPairConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            horizon: 1.0,
            x0: vec![0.0],
            scale: 1.5,
            dim_w: 1,
            dim_extra: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonAnticipationReport {
    pub trials: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl NonAnticipationReport {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

/// Generates `trials` pairs of paths that agree up to a random cut `t_c` and
/// differ afterwards; passes iff every decision made at or before `t_c`
/// coincides on both paths.
pub fn check_nonanticipative(
    object: Checkable<'_>,
    trials: usize,
    seed: u64,
    config: &PathPairConfig,
) -> NonAnticipationReport {
    let trials = trials.max(1);
    let grid = TimeGrid::uniform(0.0, config.horizon, config.steps).expect("valid pair grid");
    let n = config.steps;
    let mut failures = 0;
    let mut first_failure = None;
    for trial in 0..trials {
        let key = noise::subkey(seed, trial as u64);
        let mut rng = noise::stream_rng(noise::subkey(key, noise::STREAM_SAMPLER));
        let cut = ((noise::uniform(&mut rng) * n as f64) as usize).min(n - 1);
        let a = sample_noise(&grid, noise::subkey(key, 1), config.dim_w, config.dim_extra);
        let mut b = sample_noise(&grid, noise::subkey(key, 2), config.dim_w, config.dim_extra);
        splice(&a, &mut b, cut);
        let detail = match object {
            Checkable::Rule(rule) => {
                let (ya, yb) = (states(&a, config), states(&b, config));
                let pa = PathView::new(grid.times(), &ya, config.x0.len());
                let pb = PathView::new(grid.times(), &yb, config.x0.len());
                let (ta, tb) = (rule.evaluate(&pa), rule.evaluate(&pb));
                ((ta <= cut || tb <= cut) && ta != tb)
                    .then(|| alloc::format!("{rule:?}: τ = {ta} vs {tb} with paths agreeing up to {cut}"))
            }
            Checkable::Strategy(strategy) => {
                let (ya, yb) = (states(&a, config), states(&b, config));
                let pa = PathView::new(grid.times(), &ya, config.x0.len());
                let pb = PathView::new(grid.times(), &yb, config.x0.len());
                (1..=cut + 1).find_map(|j| {
                    let ca = strategy.control_on_path(j, &pa).ok();
                    let cb = strategy.control_on_path(j, &pb).ok();
                    (ca != cb).then(|| {
                        alloc::format!(
                            "{}: control at index {j} is {ca:?} vs {cb:?} with paths agreeing up to {cut}",
                            strategy.name()
                        )
                    })
                })
            }
            Checkable::OpenLoop { control, v } => {
                match (realize_open_loop(control, &a, v), realize_open_loop(control, &b, v)) {
                    (Ok(va), Ok(vb)) => (0..=cut).find(|&j| va[j] != vb[j]).map(|j| {
                        alloc::format!(
                            "{}: v_{j} = {} vs {} with noise agreeing up to {cut}",
                            control.name,
                            va[j],
                            vb[j]
                        )
                    }),
                    (Err(e), _) | (_, Err(e)) => Some(alloc::format!("{}: {e}", control.name)),
                }
            }
        };
        if let Some(d) = detail {
            failures += 1;
            first_failure.get_or_insert(d);
        }
    }
    NonAnticipationReport {
        trials,
        failures,
        first_failure,
    }
}

/// Copies the first `cut` increments of `a` into `b`, so the two noise (and
/// state) paths agree on `t_0, ..., t_cut`.
fn splice(a: &NoisePath, b: &mut NoisePath, cut: usize) {
    b.dw[..cut * a.dim_w].copy_from_slice(&a.dw[..cut * a.dim_w]);
    b.extra[..cut * a.dim_extra].copy_from_slice(&a.extra[..cut * a.dim_extra]);
}

/// `x0 + scale · W` on the grid, using the first `dim` Brownian coordinates
/// (repeated if `dim > dim_w`).
fn states(noise: &NoisePath, config: &PathPairConfig) -> Vec<f64> {
    let d = config.x0.len();
    let n = noise.steps();
    let mut out = Vec::with_capacity((n + 1) * d);
    out.extend_from_slice(&config.x0);
    for i in 0..n {
        let dw = noise.dw_at(i);
        for axis in 0..d {
            let prev = out[i * d + axis];
            out.push(prev + config.scale * dw[axis % noise.dim_w]);
        }
    }
    out
}
