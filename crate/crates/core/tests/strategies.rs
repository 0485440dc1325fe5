use std::sync::Arc;

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use robustctl_core::noise::{sample_noise, TimeGrid};
use robustctl_core::sde::{ControlSet, ControlSetLabel};
use robustctl_core::strategies::{
    check_nonanticipative, concatenate, realize_open_loop, Action, Checkable, ElementaryStrategy, Generator,
    OpenLoopControl, PathAction, PathPairConfig, PathView, Region, StoppingRule,
};

fn times(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    let grid = TimeGrid::uniform(0.0, 1.0, n).unwrap();
    let noise = sample_noise(&grid, seed, 1, 0);
    let mut states = vec![0.0];
    for i in 0..n {
        let next = states[i] + 1.5 * noise.dw_at(i)[0];
        states.push(next);
    }
    states
}

fn leaf_rule() -> impl Strategy<Value = StoppingRule> {
    prop_oneof![
        (0.0..1.0f64).prop_map(StoppingRule::FixedTime),
        (0usize..70).prop_map(StoppingRule::GridIndex),
        (0.05..2.0f64).prop_map(StoppingRule::exit_norm),
        (-1.5..1.5f64).prop_map(|level| StoppingRule::Hitting {
            region: Region::Above { axis: 0, level },
            after: None,
        }),
        (-1.5..1.5f64).prop_map(|level| StoppingRule::Hitting {
            region: Region::Below { axis: 0, level },
            after: None,
        }),
    ]
}

fn rule() -> impl Strategy<Value = StoppingRule> {
    leaf_rule().prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| StoppingRule::min(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| StoppingRule::max(a, b)),
            (inner, 0.05..2.0f64).prop_map(|(a, r)| StoppingRule::Hitting {
                region: Region::NormAtLeast(r),
                after: Some(Box::new(a)),
            }),
        ]
    })
}

/// Chooses from the sign of the last observed state and the prefix length.
struct SignAndLength;

impl PathAction for SignAndLength {
    fn name(&self) -> String {
        "sign_and_length".into()
    }
    fn decide(&self, prefix: &PathView<'_>) -> usize {
        let last = prefix.state(prefix.last_index())[0];
        usize::from(last >= 0.0) + 2 * (prefix.len() % 2)
    }
}

fn strategy_from(start: StoppingRule, rules: Vec<StoppingRule>) -> ElementaryStrategy {
    let n = rules.len() + 1;
    let actions = (0..n)
        .map(|k| {
            if k % 2 == 0 {
                Action::Custom(Arc::new(SignAndLength))
            } else {
                Action::Constant(k)
            }
        })
        .collect();
    ElementaryStrategy::new("random", ControlSetLabel::U, start, rules, actions).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn monitor_agrees_with_evaluation_on_every_prefix(r in rule(), n in 2usize..60, seed in any::<u64>()) {
        let t = times(n);
        let states = random_walk(n, seed);
        let full = PathView::new(&t, &states, 1);
        let tau = r.evaluate(&full);
        prop_assert!(tau <= n);
        let mut monitor = r.monitor(&t);
        for i in 0..=n {
            let prefix = full.truncate(i);
            let direct = r.fired(&prefix);
            prop_assert_eq!(monitor.poll(&r, &prefix), direct);
            prop_assert_eq!(direct, (tau <= i).then_some(tau));
        }
    }

    #[test]
    fn schedule_partitions_the_horizon(
        rules in prop::collection::vec(rule(), 0..5),
        n in 2usize..60,
        seed in any::<u64>(),
    ) {
        let t = times(n);
        let states = random_walk(n, seed);
        let path = PathView::new(&t, &states, 1);
        let strategy = strategy_from(StoppingRule::start(), rules);
        let sched = strategy.schedule(&path);
        prop_assert_eq!(sched.indices.len(), strategy.segments() + 1);
        prop_assert_eq!(sched.indices[0], 0);
        prop_assert_eq!(*sched.indices.last().unwrap(), n);
        prop_assert!(sched.indices.windows(2).all(|w| w[0] <= w[1]));
        for j in 1..=n {
            let owners = (1..sched.indices.len())
                .filter(|&k| sched.indices[k - 1] < j && j <= sched.indices[k])
                .count();
            prop_assert_eq!(owners, 1);
        }
    }

    #[test]
    fn runner_matches_prefix_evaluation(
        start in prop_oneof![Just(StoppingRule::start()), (0.0..0.5f64).prop_map(StoppingRule::FixedTime)],
        rules in prop::collection::vec(rule(), 0..5),
        n in 2usize..60,
        seed in any::<u64>(),
    ) {
        let t = times(n);
        let states = random_walk(n, seed);
        let path = PathView::new(&t, &states, 1);
        let strategy = strategy_from(start, rules);
        let first = strategy.start_rule().evaluate(&path);
        let mut runner = strategy.runner(&t);
        for i in first..n {
            let prefix = path.truncate(i);
            let online = runner.next_control(&prefix).unwrap();
            prop_assert_eq!(online, strategy.evaluate(i + 1, &path.truncate(i)).unwrap());
            prop_assert_eq!(online, strategy.control_on_path(i + 1, &path).unwrap());
        }
        prop_assert_eq!(runner.clamps(), strategy.schedule(&path).clamps);
    }

    #[test]
    fn concatenation_switches_at_the_rule(
        head_rules in prop::collection::vec(rule(), 0..3),
        tail_rules in prop::collection::vec(rule(), 0..3),
        tau in rule(),
        n in 2usize..60,
        seed in any::<u64>(),
    ) {
        let t = times(n);
        let states = random_walk(n, seed);
        let path = PathView::new(&t, &states, 1);
        let head = strategy_from(StoppingRule::start(), head_rules);
        let tail = strategy_from(tau.clone(), tail_rules);
        let joined = concatenate(&head, &tail, &tau).unwrap();
        let cut = tau.evaluate(&path);
        for j in 1..=n {
            let expected = if j <= cut {
                head.control_on_path(j, &path).unwrap()
            } else {
                tail.control_on_path(j, &path).unwrap()
            };
            prop_assert_eq!(joined.control_on_path(j, &path).unwrap(), expected);
        }
    }

    #[test]
    fn restriction_agrees_after_the_rule(
        rules in prop::collection::vec(rule(), 0..4),
        tau in rule(),
        n in 2usize..60,
        seed in any::<u64>(),
    ) {
        let t = times(n);
        let states = random_walk(n, seed);
        let path = PathView::new(&t, &states, 1);
        let ordered = rules
            .into_iter()
            .scan(StoppingRule::start(), |prev, r| {
                *prev = StoppingRule::max(prev.clone(), r);
                Some(prev.clone())
            })
            .collect();
        let strategy = strategy_from(StoppingRule::start(), ordered);
        let restricted = strategy.restrict_after(tau.clone());
        for j in tau.evaluate(&path) + 1..=n {
            prop_assert_eq!(
                restricted.control_on_path(j, &path).unwrap(),
                strategy.control_on_path(j, &path).unwrap()
            );
        }
    }

    #[test]
    fn open_loop_controls_stay_in_the_set(pieces in 1usize..20, key in any::<u64>(), seed in any::<u64>()) {
        let v = ControlSet::scalar("V", &[-1.0, 0.0, 2.0]).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 40).unwrap();
        let noise = sample_noise(&grid, seed, 1, 1);
        for generator in [
            Generator::Piecewise { pieces, key },
            Generator::SignOfBrownian { coord: 0, nonneg: 2, neg: 0 },
            Generator::SignOfExtra { coord: 0, nonneg: 1, neg: 2 },
        ] {
            let path = realize_open_loop(&OpenLoopControl::new("g", generator), &noise, &v).unwrap();
            prop_assert_eq!(path.len(), 40);
            prop_assert!(path.iter().all(|&j| j < v.len()));
        }
    }
}

#[test]
fn random_rules_pass_the_pair_tester() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    for _ in 0..20 {
        let r = rule().new_tree(&mut runner).unwrap().current();
        let report = check_nonanticipative(Checkable::Rule(&r), 300, 9, &PathPairConfig::default());
        assert!(report.pass(), "{:?}", report.first_failure);
    }
}

#[test]
fn lookahead_generators_fail_the_pair_tester() {
    let v = ControlSet::scalar("V", &[-1.0, 1.0]).unwrap();
    for generator in [
        Generator::SignOfBrownian {
            coord: 0,
            nonneg: 1,
            neg: 0,
        },
        Generator::SignOfExtra {
            coord: 0,
            nonneg: 1,
            neg: 0,
        },
    ] {
        let control = OpenLoopControl::new("peek", generator).with_lookahead();
        let report = check_nonanticipative(
            Checkable::OpenLoop {
                control: &control,
                v: &v,
            },
            1000,
            4,
            &PathPairConfig::default(),
        );
        assert!(!report.pass());
    }
}
