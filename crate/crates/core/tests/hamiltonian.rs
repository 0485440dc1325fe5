use proptest::prelude::*;
use robustctl_core::hamiltonian::{
    hamiltonian_lower, hamiltonian_mixed, hamiltonian_upper, lagrangian, HamiltonianQuery,
};
use robustctl_core::matrix_game::{duality_gap, solve};
use robustctl_core::problems::{self, BENCHMARK_IDS};

/// Fictitious play: returns a bracket `[lo, hi]` on the value from the
/// empirical mixtures after `rounds` best-response rounds.
fn fictitious_play(a: &[f64], rows: usize, cols: usize, rounds: usize) -> (f64, f64) {
    let (mut row_counts, mut col_counts) = (vec![0u64; rows], vec![0u64; cols]);
    let (mut row_payoff, mut col_payoff) = (vec![0.0; rows], vec![0.0; cols]);
    let (mut i, mut j) = (0, 0);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for round in 1..=rounds {
        row_counts[i] += 1;
        col_counts[j] += 1;
        for c in 0..cols {
            col_payoff[c] += a[i * cols + c];
        }
        for r in 0..rows {
            row_payoff[r] += a[r * cols + j];
        }
        let n = round as f64;
        let (best_row, best) =
            row_payoff.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (r, &x)| if x > acc.1 { (r, x) } else { acc },
            );
        let (best_col, worst) =
            col_payoff
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (c, &x)| if x < acc.1 { (c, x) } else { acc });
        lo = lo.max(worst / n);
        hi = hi.min(best / n);
        i = best_row;
        j = best_col;
    }
    (lo, hi)
}

fn matrix() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..6, 1usize..6).prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(-5.0..5.0f64, r * c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matrix_game_value_lies_in_fictitious_play_bracket((rows, cols, a) in matrix()) {
        let sol = solve(&a, rows, cols).unwrap();
        let (lo, hi) = fictitious_play(&a, rows, cols, 20_000);
        prop_assert!(lo - 1e-9 <= sol.value && sol.value <= hi + 1e-9, "{lo} <= {} <= {hi}", sol.value);
        prop_assert!(hi - lo < 0.5);
        let gap = duality_gap(&a, rows, cols, &sol.row, &sol.col);
        prop_assert!(gap <= 1e-8 * 5.0);
        prop_assert!((sol.row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!((sol.col.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(sol.row.iter().chain(&sol.col).all(|w| *w >= 0.0));
    }

    #[test]
    fn matrix_game_value_is_between_pure_bounds((rows, cols, a) in matrix()) {
        let sol = solve(&a, rows, cols).unwrap();
        let maximin = (0..rows)
            .map(|i| (0..cols).map(|j| a[i * cols + j]).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max);
        let minimax = (0..cols)
            .map(|j| (0..rows).map(|i| a[i * cols + j]).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(maximin - 1e-9 <= sol.value && sol.value <= minimax + 1e-9);
    }

    #[test]
    fn hamiltonians_are_ordered_on_every_benchmark(
        t in 0.0..1.0f64,
        x in -5.0..5.0f64,
        p in -10.0..10.0f64,
        m in -10.0..10.0f64,
    ) {
        for id in BENCHMARK_IDS {
            let spec = problems::build(id, 1.0).unwrap().unwrap();
            let q = HamiltonianQuery::scalar(t, x, p, m).unwrap();
            let lower = hamiltonian_lower(&spec, &q).unwrap();
            let upper = hamiltonian_upper(&spec, &q).unwrap();
            let mixed = hamiltonian_mixed(&spec, &q).unwrap();
            prop_assert!(lower.value <= mixed.value + 1e-8);
            prop_assert!(mixed.value <= upper.value + 1e-8);
            prop_assert_eq!(lower.value, lagrangian(&spec, &q, lower.u_star, lower.v_star).unwrap());
            prop_assert_eq!(upper.value, lagrangian(&spec, &q, upper.u_star, upper.v_star).unwrap());
            if problems::info(id).unwrap().concave_in_u {
                prop_assert!(mixed.value - lower.value <= 1e-8);
            }
        }
    }

    #[test]
    fn pennies_lower_hamiltonian_is_positively_homogeneous(p in -10.0..10.0f64, lambda in 0.01..50.0f64) {
        let spec = problems::pennies(1.0).unwrap();
        let at = |p: f64| hamiltonian_lower(&spec, &HamiltonianQuery::scalar(0.0, 0.0, p, 0.0).unwrap()).unwrap().value;
        prop_assert!((at(lambda * p) - lambda * at(p)).abs() <= 1e-12 * (1.0 + (lambda * p).abs()));
        prop_assert_eq!(at(p), -p.abs());
    }
}

#[test]
fn pennies_query_gives_the_exact_triple() {
    let spec = problems::pennies(1.0).unwrap();
    let q = HamiltonianQuery::scalar(0.0, 0.0, 1.0, 0.0).unwrap();
    assert_eq!(hamiltonian_lower(&spec, &q).unwrap().value, -1.0);
    assert_eq!(hamiltonian_mixed(&spec, &q).unwrap().value, 0.0);
    assert_eq!(hamiltonian_upper(&spec, &q).unwrap().value, 1.0);
}
