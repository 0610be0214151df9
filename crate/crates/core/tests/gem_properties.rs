use proptest::prelude::*;
use tailwatch_core::gem::{gem_score, partition_nominal};
use tailwatch_core::knn::knn_sum_distance;
use tailwatch_core::{GemBaseline, PointSet};

/// Sum of the k smallest distances, found by sorting every distance.
fn oracle(x: &[f64], s1: &PointSet, k: usize) -> f64 {
    let mut d: Vec<f64> = s1
        .rows()
        .map(|y| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .collect();
    d.sort_by(f64::total_cmp);
    d[..k].iter().map(|v| v.sqrt()).sum()
}

fn cloud(dim: usize, min: usize, max: usize) -> impl Strategy<Value = PointSet> {
    (min..=max).prop_flat_map(move |n| {
        prop::collection::vec(-10.0f64..10.0, n * dim).prop_map(move |v| PointSet::from_flat(dim, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_full_sort_oracle(s1 in cloud(3, 5, 200), x in prop::collection::vec(-12.0f64..12.0, 3), k in 1usize..5) {
        prop_assert_eq!(knn_sum_distance(&x, &s1, k).unwrap(), oracle(&x, &s1, k));
    }

    #[test]
    fn invariant_to_reference_order(s1 in cloud(2, 5, 60), x in prop::collection::vec(-12.0f64..12.0, 2), seed in any::<u64>()) {
        let b = GemBaseline::from_sets(s1.clone(), &s1, 3, 0).unwrap();
        let mut order: Vec<usize> = (0..s1.len()).collect();
        let mut rng = tailwatch_core::theory::trial_rng(seed, 0);
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        let shuffled = s1.select(&order);
        let b2 = GemBaseline::from_sets(shuffled.clone(), &shuffled, 3, 0).unwrap();
        prop_assert_eq!(gem_score(&b, &x).unwrap(), gem_score(&b2, &x).unwrap());
        prop_assert_eq!(b.sorted_stats(), b2.sorted_stats());
    }

    #[test]
    fn nondecreasing_in_k(s1 in cloud(4, 8, 80), x in prop::collection::vec(-12.0f64..12.0, 4)) {
        let mut prev = 0.0;
        for k in 1..=8 {
            let v = knn_sum_distance(&x, &s1, k).unwrap();
            prop_assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn translation_invariant(s1 in cloud(3, 5, 60), x in prop::collection::vec(-12.0f64..12.0, 3), shift in prop::collection::vec(-100.0f64..100.0, 3)) {
        let moved = s1.map_rows(3, |y| Ok(y.iter().zip(&shift).map(|(a, b)| a + b).collect())).unwrap();
        let xs: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let a = knn_sum_distance(&x, &s1, 2).unwrap();
        let b = knn_sum_distance(&xs, &moved, 2).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a), "{} vs {}", a, b);
    }

    #[test]
    fn partition_is_a_split(n in 3usize..300, seed in any::<u64>()) {
        let data = PointSet::from_flat(1, (0..n).map(|i| i as f64).collect()).unwrap();
        let n1 = 1 + (seed as usize % (n - 1));
        let (s1, s2) = partition_nominal(&data, n1, seed).unwrap();
        prop_assert_eq!(s1.len(), n1);
        let mut all: Vec<f64> = s1.as_flat().iter().chain(s2.as_flat()).copied().collect();
        all.sort_by(f64::total_cmp);
        prop_assert_eq!(all, data.as_flat().to_vec());
    }
}

#[test]
fn baseline_scores_agree_with_oracle() {
    let mut rng = tailwatch_core::theory::trial_rng(3, 0);
    let data = PointSet::from_flat(3, (0..300).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).unwrap();
    let b = GemBaseline::build(&data, 40, 4, 11).unwrap();
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        assert_eq!(b.score(&x).unwrap(), oracle(&x, b.reference(), 4));
    }
}
