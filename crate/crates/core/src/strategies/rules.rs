use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use core::fmt;

use super::path::PathView;

/// A user-defined stopping rule.
///
/// `evaluate` returns a grid index in `[0, N]`; on a prefix ending at `i`, a
/// value `<= i` means the rule has fired there, anything larger means it has
/// not fired yet. A non-anticipative rule must give the same answer to
/// "fired by `i`?" for every continuation of the prefix.
pub trait PathRule: Send + Sync {
    fn name(&self) -> String;
    fn evaluate(&self, path: &PathView<'_>) -> usize;
}

/// Target set of a hitting rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// `|y| >= r` (Euclidean norm).
    NormAtLeast(f64),
    /// `y[axis] >= level`
    Above { axis: usize, level: f64 },
    /// `y[axis] <= level`
    Below { axis: usize, level: f64 },
}

impl Region {
    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            Region::NormAtLeast(r) => libm::sqrt(y.iter().map(|c| c * c).sum()) >= *r,
            Region::Above { axis, level } => y[*axis] >= *level,
            Region::Below { axis, level } => y[*axis] <= *level,
        }
    }
}

/// Stopping rules on the discrete path space.
#[derive(Clone)]
pub enum StoppingRule {
    /// First grid time `>= t`.
    FixedTime(f64),
    /// Grid index, capped at `N`.
    GridIndex(usize),
    /// First grid index at or after `after` (or `s`) where the path is in `region`; `T` if never.
    Hitting {
        region: Region,
        after: Option<Box<StoppingRule>>,
    },
    Min(Box<StoppingRule>, Box<StoppingRule>),
    Max(Box<StoppingRule>, Box<StoppingRule>),
    Custom(Arc<dyn PathRule>),
}

impl fmt::Debug for StoppingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StoppingRule::FixedTime(t) => write!(f, "fixed_time({t})"),
            StoppingRule::GridIndex(i) => write!(f, "grid_index({i})"),
            StoppingRule::Hitting { region, after: None } => write!(f, "hitting({region:?})"),
            StoppingRule::Hitting { region, after: Some(a) } => write!(f, "hitting({region:?}, after {a:?})"),
            StoppingRule::Min(a, b) => write!(f, "min({a:?}, {b:?})"),
            StoppingRule::Max(a, b) => write!(f, "max({a:?}, {b:?})"),
            StoppingRule::Custom(r) => write!(f, "custom({})", r.name()),
        }
    }
}

impl PartialEq for StoppingRule {
    fn eq(&self, other: &Self) -> bool {
        use StoppingRule::*;
        match (self, other) {
            (FixedTime(a), FixedTime(b)) => a == b,
            (GridIndex(a), GridIndex(b)) => a == b,
            (Hitting { region: r1, after: a1 }, Hitting { region: r2, after: a2 }) => r1 == r2 && a1 == a2,
            (Min(a1, b1), Min(a2, b2)) | (Max(a1, b1), Max(a2, b2)) => a1 == a2 && b1 == b2,
            (Custom(a), Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl StoppingRule {
    pub fn start() -> Self {
        StoppingRule::GridIndex(0)
    }

    pub fn terminal() -> Self {
        StoppingRule::GridIndex(usize::MAX)
    }

    pub fn exit_norm(radius: f64) -> Self {
        StoppingRule::Hitting {
            region: Region::NormAtLeast(radius),
            after: None,
        }
    }

    pub fn min(a: StoppingRule, b: StoppingRule) -> Self {
        StoppingRule::Min(Box::new(a), Box::new(b))
    }

    pub fn max(a: StoppingRule, b: StoppingRule) -> Self {
        StoppingRule::Max(Box::new(a), Box::new(b))
    }

    /// Evaluates the rule on a (possibly partial) path; see [`PathRule`].
    pub fn evaluate(&self, path: &PathView<'_>) -> usize {
        let n = path.horizon_index();
        match self {
            StoppingRule::FixedTime(t) => path.index_at_or_after(*t),
            StoppingRule::GridIndex(i) => (*i).min(n),
            StoppingRule::Hitting { region, after } => {
                let from = after.as_ref().map_or(0, |a| a.evaluate(path));
                if from > path.last_index() {
                    return n;
                }
                (from..=path.last_index())
                    .find(|&j| region.contains(path.state(j)))
                    .unwrap_or(n)
            }
            StoppingRule::Min(a, b) => a.evaluate(path).min(b.evaluate(path)),
            StoppingRule::Max(a, b) => a.evaluate(path).max(b.evaluate(path)),
            StoppingRule::Custom(r) => r.evaluate(path).min(n),
        }
    }

    /// Whether the rule has fired on the prefix, and where.
    pub fn fired(&self, path: &PathView<'_>) -> Option<usize> {
        let j = self.evaluate(path);
        (j <= path.last_index()).then_some(j)
    }

    pub fn monitor(&self, times: &[f64]) -> RuleMonitor {
        RuleMonitor {
            state: MonitorState::new(self, times),
        }
    }
}

#[derive(Debug, Clone)]
enum MonitorState {
    Static(usize),
    Hitting {
        after: Option<Box<MonitorState>>,
        next: usize,
        fired: Option<usize>,
    },
    Pair(Box<MonitorState>, Box<MonitorState>),
    Custom,
}

impl MonitorState {
    fn new(rule: &StoppingRule, times: &[f64]) -> Self {
        let n = times.len() - 1;
        match rule {
            StoppingRule::FixedTime(t) => {
                let tol = 1e-12 * (1.0 + libm::fabs(*t));
                MonitorState::Static(times.partition_point(|&ti| ti < t - tol).min(n))
            }
            StoppingRule::GridIndex(i) => MonitorState::Static((*i).min(n)),
            StoppingRule::Hitting { after, .. } => MonitorState::Hitting {
                after: after.as_ref().map(|a| Box::new(MonitorState::new(a, times))),
                next: 0,
                fired: None,
            },
            StoppingRule::Min(a, b) | StoppingRule::Max(a, b) => MonitorState::Pair(
                Box::new(MonitorState::new(a, times)),
                Box::new(MonitorState::new(b, times)),
            ),
            StoppingRule::Custom(_) => MonitorState::Custom,
        }
    }

    fn poll(&mut self, rule: &StoppingRule, path: &PathView<'_>) -> Option<usize> {
        let i = path.last_index();
        let n = path.horizon_index();
        match (self, rule) {
            (MonitorState::Static(k), _) => (*k <= i).then_some(*k),
            (
                MonitorState::Hitting { after, next, fired },
                StoppingRule::Hitting {
                    region,
                    after: after_rule,
                },
            ) => {
                if fired.is_some() {
                    return *fired;
                }
                let from = match (after, after_rule) {
                    (Some(m), Some(r)) => m.poll(r, path),
                    _ => Some(0),
                };
                if let Some(from) = from {
                    let lo = from.max(*next);
                    if let Some(j) = (lo..=i).find(|&j| region.contains(path.state(j))) {
                        *fired = Some(j);
                    }
                    *next = i + 1;
                }
                if fired.is_none() && i == n {
                    *fired = Some(n);
                }
                *fired
            }
            (MonitorState::Pair(ma, mb), StoppingRule::Min(a, b)) => match (ma.poll(a, path), mb.poll(b, path)) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (Some(x), None) | (None, Some(x)) => Some(x),
                (None, None) => None,
            },
            (MonitorState::Pair(ma, mb), StoppingRule::Max(a, b)) => match (ma.poll(a, path), mb.poll(b, path)) {
                (Some(x), Some(y)) => Some(x.max(y)),
                _ => None,
            },
            (MonitorState::Custom, rule) => rule.fired(path),
            _ => unreachable!("monitor built for a different rule"),
        }
    }
}

/// Incremental evaluator of a stopping rule along a growing path.
///
/// Poll with prefixes of non-decreasing length. Built-in rules cost O(1)
/// amortized per observed state; custom rules are re-evaluated on the prefix.
#[derive(Debug, Clone)]
pub struct RuleMonitor {
    state: MonitorState,
}

impl RuleMonitor {
    pub fn poll(&mut self, rule: &StoppingRule, path: &PathView<'_>) -> Option<usize> {
        self.state.poll(rule, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn fixed_time_snaps_to_grid() {
        let times = grid(4);
        let states = vec![0.0; 5];
        let path = PathView::new(&times, &states, 1);
        assert_eq!(StoppingRule::FixedTime(0.5).evaluate(&path), 2);
        assert_eq!(StoppingRule::FixedTime(0.6).evaluate(&path), 3);
        assert_eq!(StoppingRule::terminal().evaluate(&path), 4);
        assert_eq!(StoppingRule::start().evaluate(&path), 0);
    }

    #[test]
    fn hitting_takes_first_index_and_defaults_to_terminal() {
        let times = grid(5);
        let states = [0.0, 0.5, 1.2, 0.1, 1.5, 0.0];
        let path = PathView::new(&times, &states, 1);
        assert_eq!(StoppingRule::exit_norm(1.0).evaluate(&path), 2);
        let after = StoppingRule::Hitting {
            region: Region::NormAtLeast(1.0),
            after: Some(Box::new(StoppingRule::GridIndex(3))),
        };
        assert_eq!(after.evaluate(&path), 4);
        assert_eq!(StoppingRule::exit_norm(2.0).evaluate(&path), 5);
        // Partial prefix: not fired yet.
        let prefix = path.truncate(1);
        assert!(StoppingRule::exit_norm(1.0).fired(&prefix).is_none());
    }

    #[test]
    fn monitor_agrees_with_full_evaluation() {
        let times = grid(6);
        let states = [0.0, -0.4, -1.1, 0.3, 1.4, 0.2, 0.9];
        let path = PathView::new(&times, &states, 1);
        let rules = [
            StoppingRule::exit_norm(1.0),
            StoppingRule::FixedTime(0.5),
            StoppingRule::min(StoppingRule::exit_norm(1.3), StoppingRule::FixedTime(0.9)),
            StoppingRule::max(StoppingRule::exit_norm(1.0), StoppingRule::FixedTime(0.5)),
            StoppingRule::Hitting {
                region: Region::Above { axis: 0, level: 1.0 },
                after: Some(Box::new(StoppingRule::FixedTime(0.2))),
            },
        ];
        for rule in &rules {
            let mut m = rule.monitor(&times);
            let mut fired = None;
            for i in 0..=6 {
                let got = m.poll(rule, &path.truncate(i));
                if fired.is_none() {
                    fired = got;
                } else {
                    assert_eq!(got, fired);
                }
                assert_eq!(got, rule.fired(&path.truncate(i)), "{rule:?} at {i}");
            }
            assert_eq!(fired, Some(rule.evaluate(&path)));
        }
    }
}
