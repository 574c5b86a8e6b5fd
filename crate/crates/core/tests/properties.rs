use proptest::prelude::*;

use nslcc::cheb::{dct_forward, dct_inverse, fit_polynomial, lagrange_basis_table, ChebPoly, ChebyshevGrid, RealVectorCodeword};
use nslcc::decoder::syndromes;
use nslcc::metrics::{p_error_surrogate, trace_of, CollusionMatrices, DeltaRule, SurrogateParams};
use nslcc::worker::{build_assignment, ProfileSet};
use nslcc::{ExperimentConfig, IndexSet, Matrix};

fn subset(n: usize, size: usize) -> impl Strategy<Value = IndexSet> {
    proptest::sample::subsequence((1..=n).collect::<Vec<_>>(), size).prop_map(|v| IndexSet::new(v).unwrap())
}

fn permutation(len: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..len).collect::<Vec<_>>()).prop_shuffle()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    num / den
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_rows_sum_to_one(m in 1usize..12, n in 1usize..40) {
        let basis = lagrange_basis_table(&ChebyshevGrid::<f64>::new(m).unwrap(), &ChebyshevGrid::new(n).unwrap()).unwrap();
        for i in 1..=n {
            let s: f64 = basis.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-9, "row {i} sums to {s}");
        }
    }

    #[test]
    fn interpolation_recovers_all_samples(
        coeffs in prop::collection::vec(-1.0f64..1.0, 11),
        keep in subset(21, 11),
    ) {
        let grid = ChebyshevGrid::<f64>::new(21).unwrap();
        let word = RealVectorCodeword::from_poly(&ChebPoly::new(coeffs), 21).unwrap();
        let points: Vec<(f64, f64)> = keep.iter().map(|i| (grid.node(i), word.samples()[i - 1])).collect();
        let fit = fit_polynomial(&points, 11).unwrap();
        let back: Vec<f64> = grid.nodes().iter().map(|&x| fit.poly.eval(x)).collect();
        prop_assert!(rel_diff(&back, word.samples()) <= 1e-8);
    }

    #[test]
    fn syndromes_vanish_on_codewords(
        n in 4usize..40,
        k_frac in 0.1f64..0.9,
        seed in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let k = ((n as f64 * k_frac) as usize).clamp(1, n - 1);
        let word = RealVectorCodeword::from_poly(&ChebPoly::new(seed[..k].to_vec()), n).unwrap();
        let s = syndromes(&word, k).unwrap();
        prop_assert!(s.norm() <= 1e-12 * word.scale().max(1.0));
    }

    #[test]
    fn dct_round_trip(x in prop::collection::vec(-1e3f64..1e3, 1..64)) {
        let back = dct_inverse(&dct_forward(&x).unwrap()).unwrap();
        prop_assert!(rel_diff(&back, &x) <= 1e-10);
    }

    #[test]
    fn trace_ignores_row_and_column_order(
        t_set in subset(21, 3),
        rows in permutation(3),
        data_cols in permutation(3),
        noise_cols in permutation(3),
    ) {
        let basis = lagrange_basis_table(&ChebyshevGrid::<f64>::new(6).unwrap(), &ChebyshevGrid::new(21).unwrap()).unwrap();
        let m = CollusionMatrices::new(&t_set, &basis, 3).unwrap();
        let base = trace_of(&m).value;
        let shuffled = CollusionMatrices {
            t_set: t_set.clone(),
            h: Matrix::from_fn(3, 3, |a, c| m.h.get(rows[a], data_cols[c])),
            w: Matrix::from_fn(3, 3, |a, c| m.w.get(rows[a], noise_cols[c])),
        };
        let moved = trace_of(&shuffled).value;
        prop_assert!(((moved - base) / base).abs() <= 1e-9, "{base} vs {moved}");
    }

    #[test]
    fn surrogate_is_reflection_symmetric(q in subset(13, 6), s2 in prop::sample::select(vec![1e-2, 1e-3, 1e-4])) {
        let params = SurrogateParams { zeta: 100.0, sigma_p2: s2, a: 2, delta_rule: DeltaRule::PerPairMax };
        let mirrored = IndexSet::new(q.as_slice().iter().rev().map(|i| 14 - i).collect()).unwrap();
        let a = p_error_surrogate(&q, &params, 13, u128::MAX).unwrap();
        let b = p_error_surrogate(&mirrored, &params, 13, u128::MAX).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(f64::MIN_POSITIVE), "{a} vs {b}");
    }

    #[test]
    fn sorted_pairing_is_a_bijection(q in subset(21, 12), v in subset(21, 12)) {
        let profile = ProfileSet::new(21, v.clone()).unwrap();
        let map = build_assignment(&q, &profile).unwrap();
        for i in 1..=21 {
            prop_assert_eq!(map.eval_index_of(map.worker_of(i)), i);
        }
        prop_assert_eq!(map.unreliable(), v.clone());
        prop_assert_eq!(map.eval_indices_of(&v), q.clone());
        for (i, j) in q.iter().zip(v.iter()) {
            prop_assert_eq!(map.worker_of(i), j);
        }
    }

    #[test]
    fn config_survives_toml(
        seed in any::<u64>(),
        trials in 1usize..10_000,
        ws in prop::collection::vec(0.0f64..=1.0, 1..6),
        s2 in prop::collection::vec(1e-8f64..1.0, 1..4),
        zeta in 1.0f64..1e4,
    ) {
        let mut cfg = ExperimentConfig::table1();
        cfg.run.seed = seed;
        cfg.run.trials = trials;
        cfg.search.w = ws;
        cfg.robustness.sigma_p2 = s2;
        cfg.robustness.zeta = zeta;
        let back = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
