mod support;

use multirep_core::data::{derive_seed, make_synthetic, monte_carlo_split, name_hash, Dataset, SyntheticKind};
use multirep_core::representations::{build_stack, RepKind, Series};
use proptest::prelude::*;

fn dataset(counts: &[usize], seed: u64) -> Dataset {
    let mut r = support::rng(seed);
    let mut series = Vec::new();
    for (label, &n) in counts.iter().enumerate() {
        for _ in 0..n {
            series.push(Series::new(support::random_series(&mut r, 8), label).unwrap());
        }
    }
    Dataset::new("toy", series).unwrap()
}

#[test]
fn seeds_are_stable() {
    assert_eq!(derive_seed(1, 2), derive_seed(1, 2));
    assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
    assert_eq!(name_hash("abc"), 0xe71fa2190541574b);
}

#[test]
fn original_split_comes_first() {
    let ds = dataset(&[4, 4], 1).with_original_split(5).unwrap();
    let plans = monte_carlo_split(&ds, 3, 9, 0.5).unwrap();
    assert_eq!(plans[0].train, vec![0, 1, 2, 3, 4]);
    assert_eq!(plans[0].test, vec![5, 6, 7]);
    assert_ne!(plans[1], plans[2]);
}

#[test]
fn singleton_class_is_rejected() {
    assert!(monte_carlo_split(&dataset(&[3, 1], 2), 2, 0, 0.5).is_err());
}

#[test]
fn synthetic_classes_separate_in_spectrum() {
    let ds = make_synthetic(SyntheticKind::TwoSines, 60, 64, 4).unwrap();
    let plan = &monte_carlo_split(&ds, 1, 4, 2.0 / 3.0).unwrap()[0];
    let spec = |i: usize| build_stack(&ds.series()[i].values, &[RepKind::FftMagnitude]).unwrap().as_slice().to_vec();
    let mut hits = 0;
    for &t in &plan.test {
        let q = spec(t);
        let nearest = plan
            .train
            .iter()
            .min_by(|&&a, &&b| {
                let d = |i: usize| spec(i).iter().zip(&q).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
                d(a).total_cmp(&d(b))
            })
            .unwrap();
        hits += (ds.series()[*nearest].label == ds.series()[t].label) as usize;
    }
    assert!(hits as f64 / plan.test.len() as f64 >= 0.95);
}

#[test]
fn synthetic_is_deterministic_and_balanced() {
    for kind in [SyntheticKind::TwoSines, SyntheticKind::NoiseVsTrend] {
        let a = make_synthetic(kind, 20, 32, 5).unwrap();
        assert_eq!(a, make_synthetic(kind, 20, 32, 5).unwrap());
        assert_ne!(a, make_synthetic(kind, 20, 32, 6).unwrap());
        assert_eq!(a.class_counts(), vec![10, 10]);
    }
    assert!(make_synthetic(SyntheticKind::TwoSines, 7, 64, 0).is_err());
}

proptest! {
    #[test]
    fn plans_are_valid_and_stratified(
        counts in prop::collection::vec(2usize..12, 2..5),
        fraction in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let ds = dataset(&counts, seed);
        let plans = monte_carlo_split(&ds, 4, seed, fraction).unwrap();
        prop_assert_eq!(&plans, &monte_carlo_split(&ds, 4, seed, fraction).unwrap());
        prop_assert_eq!(&plans[..2], &monte_carlo_split(&ds, 2, seed, fraction).unwrap()[..]);
        for p in &plans {
            p.validate(&ds).unwrap();
            prop_assert_eq!(p.train.len() + p.test.len(), ds.len());
            for (c, &n) in counts.iter().enumerate() {
                let got = p.train.iter().filter(|&&i| ds.series()[i].label == c).count();
                let want = fraction * n as f64;
                prop_assert!((got as f64 - want).abs() <= 1.0, "class {} got {} want {}", c, got, want);
                prop_assert!(got >= 1 && got < n);
            }
        }
    }
}
