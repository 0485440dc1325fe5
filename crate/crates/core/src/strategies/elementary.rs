use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use super::feedback::FeedbackMap;
use super::path::PathView;
use super::rules::{RuleMonitor, StoppingRule};
use crate::error::{Error, Result};
use crate::sde::ControlSetLabel;

/// A user-defined action `ξ_k`; receives the path up to `τ_{k-1}` only.
pub trait PathAction: Send + Sync {
    fn name(&self) -> String;
    fn decide(&self, prefix: &PathView<'_>) -> usize;
}

/// The constant action held on one segment of an elementary strategy.
#[derive(Clone)]
pub enum Action {
    Constant(usize),
    /// `φ(t, y(t))` read at the segment's starting time.
    Feedback(Arc<FeedbackMap>),
    /// Evaluate `inner` on the prefix stopped at `rule` (which must not exceed
    /// the segment start); used by restrictions of a strategy.
    FrozenAt {
        rule: StoppingRule,
        inner: Box<Action>,
    },
    Custom(Arc<dyn PathAction>),
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Constant(i) => write!(f, "constant({i})"),
            Action::Feedback(_) => write!(f, "feedback"),
            Action::FrozenAt { rule, inner } => write!(f, "{inner:?} frozen at {rule:?}"),
            Action::Custom(a) => write!(f, "custom({})", a.name()),
        }
    }
}

impl Action {
    /// `prefix` ends at the decision time.
    pub fn decide(&self, prefix: &PathView<'_>) -> usize {
        match self {
            Action::Constant(i) => *i,
            Action::Feedback(map) => {
                let i = prefix.last_index();
                map.lookup(prefix.times()[i], prefix.state(i))
            }
            Action::FrozenAt { rule, inner } => {
                let j = rule.evaluate(prefix).min(prefix.last_index());
                inner.decide(&prefix.truncate(j))
            }
            Action::Custom(a) => a.decide(prefix),
        }
    }
}

/// Resolved stopping indices `τ_0 <= ... <= τ_n` of a strategy on one path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub indices: Vec<usize>,
    /// How many rules had to be raised to a predecessor that fired before `T`.
    pub clamps: usize,
}

/// An elementary feedback strategy: stopping rules `τ_0 <= τ_1 <= ... <= τ_n = T`
/// and actions `ξ_1, ..., ξ_n`, with `ξ_k` held on `(τ_{k-1}, τ_k]`.
#[derive(Clone)]
pub struct ElementaryStrategy {
    name: String,
    target: ControlSetLabel,
    start: StoppingRule,
    /// `τ_1, ..., τ_{n-1}`; `τ_n = T` is implicit.
    rules: Vec<StoppingRule>,
    actions: Vec<Action>,
}

impl fmt::Debug for ElementaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ElementaryStrategy")
            .field("name", &self.name)
            .field("target", &self.target)
            .field("start", &self.start)
            .field("rules", &self.rules)
            .field("actions", &self.actions)
            .finish()
    }
}

impl ElementaryStrategy {
    /// `actions.len()` must be `rules.len() + 1`.
    pub fn new(
        name: impl Into<String>,
        target: ControlSetLabel,
        start: StoppingRule,
        rules: Vec<StoppingRule>,
        actions: Vec<Action>,
    ) -> Result<Self> {
        if actions.is_empty() || actions.len() != rules.len() + 1 {
            return Err(Error::Structural(alloc::format!(
                "{} intermediate rules need {} actions, got {}",
                rules.len(),
                rules.len() + 1,
                actions.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            target,
            start,
            rules,
            actions,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn target(&self) -> ControlSetLabel {
        self.target
    }

    pub fn start_rule(&self) -> &StoppingRule {
        &self.start
    }

    pub fn rules(&self) -> &[StoppingRule] {
        &self.rules
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    /// Number of segments `n`.
    pub fn segments(&self) -> usize {
        self.actions.len()
    }

    /// Evaluates all rules on `path` with monotone clamping.
    pub fn schedule(&self, path: &PathView<'_>) -> Schedule {
        let last = path.last_index();
        let mut indices = Vec::with_capacity(self.rules.len() + 2);
        indices.push(self.start.evaluate(path));
        let mut clamps = 0;
        for rule in &self.rules {
            let prev = *indices.last().unwrap();
            let raw = rule.evaluate(path);
            if raw < prev && prev <= last && prev < path.horizon_index() {
                clamps += 1;
            }
            indices.push(raw.max(prev));
        }
        indices.push(path.horizon_index());
        Schedule { indices, clamps }
    }

    /// `α(t_j, y)` evaluated directly from its definition on `path`.
    ///
    /// The rules see all of `path`; only actions are restricted to their
    /// decision prefix. Use [`evaluate`](Self::evaluate) for a decision that
    /// provably only reads `y(t_0..t_{j-1})`.
    pub fn control_on_path(&self, j: usize, path: &PathView<'_>) -> Result<usize> {
        let sched = self.schedule(path);
        let t = path.times()[j.min(path.horizon_index())];
        if j == 0 || j > path.horizon_index() || j <= sched.indices[0] {
            return Err(Error::Interval {
                t,
                start: path.times()[sched.indices[0].min(path.horizon_index())],
            });
        }
        let k = (1..sched.indices.len())
            .find(|&k| j <= sched.indices[k])
            .expect("τ_n = T bounds every grid index");
        let decision = sched.indices[k - 1];
        Ok(self.actions[k - 1].decide(&path.truncate(decision)))
    }

    /// The control this strategy uses on `(t_{j-1}, t_j]`, read from the
    /// prefix `y(t_0), ..., y(t_{j-1})`. `prefix` must hold at least `j` states.
    pub fn evaluate(&self, j: usize, prefix: &PathView<'_>) -> Result<usize> {
        if j == 0 {
            return Err(Error::Interval {
                t: prefix.times()[0],
                start: prefix.times()[0],
            });
        }
        if prefix.len() < j {
            return Err(Error::InvalidInput(alloc::format!(
                "prefix has {} states, time index {j} needs {j}",
                prefix.len()
            )));
        }
        self.control_on_path(j, &prefix.truncate(j - 1))
    }

    /// Checks that the raw (unclamped) rules are ordered on every path.
    pub fn verify_order(&self, paths: &[PathView<'_>]) -> Result<()> {
        for (p, path) in paths.iter().enumerate() {
            let mut prev = self.start.evaluate(path);
            for (k, rule) in self.rules.iter().enumerate() {
                let next = rule.evaluate(path);
                if next < prev {
                    return Err(Error::Structural(alloc::format!(
                        "{}: rule {} fires at index {next} before its predecessor ({prev}) on test path {p}",
                        self.name,
                        k + 1
                    )));
                }
                prev = next;
            }
        }
        Ok(())
    }

    /// The strategy restricted to `(τ, T]`, starting at `tau`.
    ///
    /// On each path the result uses the same actions as `self` after `τ`,
    /// decided with the same information.
    pub fn restrict_after(&self, tau: StoppingRule) -> ElementaryStrategy {
        let rules = self
            .rules
            .iter()
            .map(|r| StoppingRule::max(r.clone(), tau.clone()))
            .collect();
        let mut decision_rules = Vec::with_capacity(self.actions.len());
        decision_rules.push(self.start.clone());
        decision_rules.extend(self.rules.iter().cloned());
        let actions = self
            .actions
            .iter()
            .zip(decision_rules)
            .map(|(a, rule)| Action::FrozenAt {
                rule,
                inner: Box::new(a.clone()),
            })
            .collect();
        ElementaryStrategy {
            name: alloc::format!("{}|after {:?}", self.name, tau),
            target: self.target,
            start: tau,
            rules,
            actions,
        }
    }

    pub fn runner(&self, times: &[f64]) -> StrategyRunner<'_> {
        StrategyRunner {
            strategy: self,
            start: self.start.monitor(times),
            monitors: self.rules.iter().map(|r| r.monitor(times)).collect(),
            segment: 0,
            boundary: 0,
            current: None,
            clamps: 0,
        }
    }
}

/// `α ⊗_τ α̃`: `α` on `(s, τ]`, `α̃` on `(τ, T]`.
///
/// `tail` must start at `tau` and both strategies must share a target.
pub fn concatenate(
    head: &ElementaryStrategy,
    tail: &ElementaryStrategy,
    tau: &StoppingRule,
) -> Result<ElementaryStrategy> {
    if head.target != tail.target {
        return Err(Error::Structural(
            "concatenated strategies have different targets".into(),
        ));
    }
    if &tail.start != tau {
        return Err(Error::Structural(alloc::format!(
            "tail strategy starts at {:?}, not at the concatenation rule {tau:?}",
            tail.start
        )));
    }
    let mut rules: Vec<StoppingRule> = head
        .rules
        .iter()
        .map(|r| StoppingRule::min(r.clone(), tau.clone()))
        .collect();
    rules.push(tau.clone());
    rules.extend(tail.rules.iter().cloned());
    let mut actions = head.actions.clone();
    actions.extend(tail.actions.iter().cloned());
    ElementaryStrategy::new(
        alloc::format!("{}⊗{}", head.name, tail.name),
        head.target,
        head.start.clone(),
        rules,
        actions,
    )
}

/// A strategy holding `index` on `(s, T]`.
pub fn constant_strategy(name: impl Into<String>, target: ControlSetLabel, index: usize) -> ElementaryStrategy {
    ElementaryStrategy {
        name: name.into(),
        target,
        start: StoppingRule::start(),
        rules: Vec::new(),
        actions: alloc::vec![Action::Constant(index)],
    }
}

/// `count + 1` evenly spaced decision times from `s` to `T`.
pub fn uniform_decision_times(s: f64, horizon: f64, count: usize) -> Vec<f64> {
    let mut times: Vec<f64> = (0..=count)
        .map(|k| s + (horizon - s) * k as f64 / count as f64)
        .collect();
    if let Some(last) = times.last_mut() {
        *last = horizon;
    }
    times
}

/// Grid feedback strategy: decide `φ(t_{j_{k-1}}, y(t_{j_{k-1}}))` at each
/// decision time and hold it until the next one.
pub fn make_grid_strategy(
    name: impl Into<String>,
    feedback: Arc<FeedbackMap>,
    decision_times: &[f64],
) -> Result<ElementaryStrategy> {
    if decision_times.len() < 2 {
        return Err(Error::InvalidInput(
            "grid strategy needs at least the start and terminal times".into(),
        ));
    }
    if decision_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("decision times must be strictly increasing".into()));
    }
    let n = decision_times.len() - 1;
    let rules = decision_times[1..n]
        .iter()
        .map(|&t| StoppingRule::FixedTime(t))
        .collect();
    let actions = (0..n).map(|_| Action::Feedback(feedback.clone())).collect();
    ElementaryStrategy::new(
        name,
        feedback.target(),
        StoppingRule::FixedTime(decision_times[0]),
        rules,
        actions,
    )
}

/// Incremental evaluation of a strategy along a simulated path.
///
/// The action of segment `k` is computed once, when `τ_{k-1}` fires.
pub struct StrategyRunner<'s> {
    strategy: &'s ElementaryStrategy,
    start: RuleMonitor,
    monitors: Vec<RuleMonitor>,
    segment: usize,
    boundary: usize,
    current: Option<usize>,
    clamps: usize,
}

impl StrategyRunner<'_> {
    /// Control on `(t_i, t_{i+1}]` where `i = prefix.last_index()`.
    pub fn next_control(&mut self, prefix: &PathView<'_>) -> Result<usize> {
        let s = self.strategy;
        let i = prefix.last_index();
        if self.segment == 0 {
            match self.start.poll(&s.start, prefix) {
                Some(j) => {
                    self.segment = 1;
                    self.boundary = j;
                }
                None => {
                    return Err(Error::Interval {
                        t: prefix.times()[i + 1],
                        start: prefix.times()[s.start.evaluate(prefix).min(prefix.horizon_index())],
                    })
                }
            }
        }
        while self.segment < s.segments() {
            let k = self.segment;
            let Some(raw) = self.monitors[k - 1].poll(&s.rules[k - 1], prefix) else {
                break;
            };
            if raw < self.boundary {
                self.clamps += 1;
            }
            self.boundary = raw.max(self.boundary);
            self.segment += 1;
            self.current = None;
        }
        if self.current.is_none() {
            let decision = prefix.truncate(self.boundary);
            self.current = Some(s.actions[self.segment - 1].decide(&decision));
        }
        Ok(self.current.unwrap())
    }

    pub fn clamps(&self) -> usize {
        self.clamps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::{Region, SpaceAxis};
    use alloc::vec;

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    fn two_piece() -> ElementaryStrategy {
        ElementaryStrategy::new(
            "two",
            ControlSetLabel::U,
            StoppingRule::start(),
            vec![StoppingRule::FixedTime(0.5)],
            vec![Action::Constant(0), Action::Constant(1)],
        )
        .unwrap()
    }

    #[test]
    fn constant_strategy_everywhere() {
        let times = grid(8);
        let states: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let path = PathView::new(&times, &states, 1);
        let a = constant_strategy("c", ControlSetLabel::U, 3);
        for j in 1..=8 {
            assert_eq!(a.evaluate(j, &path).unwrap(), 3);
        }
    }

    #[test]
    fn fixed_time_partition() {
        let times = grid(4);
        let states = [0.0; 5];
        let path = PathView::new(&times, &states, 1);
        let a = two_piece();
        // t = T/4 -> a, t = 3T/4 -> b; t = T/2 is still in the first piece.
        assert_eq!(a.evaluate(1, &path).unwrap(), 0);
        assert_eq!(a.evaluate(2, &path).unwrap(), 0);
        assert_eq!(a.evaluate(3, &path).unwrap(), 1);
        assert_eq!(a.evaluate(4, &path).unwrap(), 1);
        assert!(matches!(a.evaluate(0, &path), Err(Error::Interval { .. })));
    }

    #[test]
    fn evaluation_before_start_is_an_interval_error() {
        let times = grid(4);
        let states = [0.0; 5];
        let path = PathView::new(&times, &states, 1);
        let tail = constant_strategy("b", ControlSetLabel::U, 1).restrict_after(StoppingRule::FixedTime(0.5));
        assert!(matches!(tail.evaluate(2, &path), Err(Error::Interval { .. })));
        assert_eq!(tail.evaluate(3, &path).unwrap(), 1);
    }

    #[test]
    fn concatenating_constants_gives_two_piece() {
        let tau = StoppingRule::FixedTime(0.5);
        let a = constant_strategy("a", ControlSetLabel::U, 0);
        let b = constant_strategy("b", ControlSetLabel::U, 1).restrict_after(tau.clone());
        let c = concatenate(&a, &b, &tau).unwrap();
        let times = grid(8);
        let states = [0.3; 9];
        let path = PathView::new(&times, &states, 1);
        let reference = two_piece();
        for j in 1..=8 {
            assert_eq!(c.evaluate(j, &path).unwrap(), reference.evaluate(j, &path).unwrap());
        }
    }

    #[test]
    fn concatenation_requires_matching_start() {
        let a = constant_strategy("a", ControlSetLabel::U, 0);
        let b = constant_strategy("b", ControlSetLabel::U, 1);
        assert!(matches!(
            concatenate(&a, &b, &StoppingRule::FixedTime(0.5)),
            Err(Error::Structural(_))
        ));
        let v = constant_strategy("v", ControlSetLabel::V, 1).restrict_after(StoppingRule::FixedTime(0.5));
        assert!(concatenate(&a, &v, &StoppingRule::FixedTime(0.5)).is_err());
    }

    #[test]
    fn clamping_is_counted() {
        let s = ElementaryStrategy::new(
            "bad",
            ControlSetLabel::U,
            StoppingRule::start(),
            vec![StoppingRule::FixedTime(0.75), StoppingRule::FixedTime(0.25)],
            vec![Action::Constant(0), Action::Constant(1), Action::Constant(2)],
        )
        .unwrap();
        let times = grid(4);
        let states = [0.0; 5];
        let path = PathView::new(&times, &states, 1);
        let sched = s.schedule(&path);
        assert_eq!(sched.indices, vec![0, 3, 3, 4]);
        assert_eq!(sched.clamps, 1);
        assert!(s.verify_order(&[path]).is_err());
        // middle segment is empty
        assert_eq!(s.evaluate(3, &path).unwrap(), 0);
        assert_eq!(s.evaluate(4, &path).unwrap(), 2);
        let mut runner = s.runner(&times);
        let used: Vec<usize> = (0..4)
            .map(|i| runner.next_control(&path.truncate(i)).unwrap())
            .collect();
        assert_eq!(used, vec![0, 0, 0, 2]);
        assert_eq!(runner.clamps(), 1);
    }

    #[test]
    fn grid_strategy_reads_state_at_decision_time() {
        let axes = vec![SpaceAxis {
            lo: -1.0,
            h: 1.0,
            count: 3,
        }];
        // one layer: x<-0.5 -> 0, |x|<=0.5 -> 1, x>0.5 -> 2
        let map = Arc::new(FeedbackMap::new(ControlSetLabel::U, 0.0, 1.0, axes, vec![0, 1, 2]).unwrap());
        let s = make_grid_strategy("g", map, &uniform_decision_times(0.0, 1.0, 2)).unwrap();
        let times = grid(4);
        let states = [0.0, 3.0, -3.0, 3.0, 0.0];
        let path = PathView::new(&times, &states, 1);
        let got: Vec<usize> = (1..=4).map(|j| s.evaluate(j, &path).unwrap()).collect();
        assert_eq!(got, vec![1, 1, 0, 0]);
        assert!(make_grid_strategy("e", Arc::new(FeedbackMap::constant(ControlSetLabel::U, 1, 0)), &[]).is_err());
    }

    #[test]
    fn hitting_concatenation_on_quiet_path_is_head() {
        let tau = StoppingRule::Hitting {
            region: Region::NormAtLeast(1.0),
            after: None,
        };
        let head = two_piece();
        let tail = constant_strategy("z", ControlSetLabel::U, 5).restrict_after(tau.clone());
        let c = concatenate(&head, &tail, &tau).unwrap();
        let times = grid(16);
        let states: Vec<f64> = (0..17).map(|i| 0.01 * libm::sin(i as f64)).collect();
        let path = PathView::new(&times, &states, 1);
        for j in 1..=16 {
            assert_eq!(c.evaluate(j, &path).unwrap(), head.evaluate(j, &path).unwrap());
        }
    }
}
