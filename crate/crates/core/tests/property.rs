//! Property-based invariants over the numeric core.

mod common;

use common::pwfs_direct;
use lanmsff::blocks::pwfs;
use lanmsff::layers::{channel_shuffle_split, channel_unshuffle, concat_channels, softmax};
use lanmsff::tensor::{Tape, Tensor};
use proptest::prelude::*;

fn small_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, n..=n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shuffle_split_concat_unshuffle_is_identity(
        data in small_values(2 * 6 * 3 * 2)
    ) {
        let tape = Tape::inference();
        let x = Tensor::new(&[2, 6, 3, 2], data).unwrap();
        let (a, b) = channel_shuffle_split(&tape, &x).unwrap();
        let cat = concat_channels(&tape, &[&a, &b]).unwrap();
        let restored = channel_unshuffle(&tape, &cat).unwrap();
        prop_assert_eq!(restored.to_vec(), x.to_vec());
    }

    #[test]
    fn softmax_rows_are_distributions_and_shift_invariant(
        row in small_values(9),
        shift in -50.0f64..50.0
    ) {
        let tape = Tape::inference();
        let z = Tensor::new(&[1, 9], row.clone()).unwrap();
        let zs = Tensor::new(&[1, 9], row.iter().map(|v| v + shift).collect()).unwrap();
        let p = softmax(&tape, &z).unwrap();
        let ps = softmax(&tape, &zs).unwrap();
        let sum: f64 = p.data().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(p.data().iter().all(|&v| v > 0.0));
        for (a, b) in p.data().iter().zip(ps.data().iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn pwfs_matches_oracle_and_bounds_inputs(
        data in small_values(9 * 2 * 2)
    ) {
        let tape = Tape::inference();
        let x = Tensor::new(&[1, 9, 2, 2], data).unwrap();
        let y = pwfs(&tape, &x).unwrap();
        prop_assert_eq!(y.to_vec(), pwfs_direct(&x.data(), (1, 9, 2, 2)));
        // output lies between the median and max of each aligned triple, so
        // it never exceeds the overall range of the inputs
        let lo = x.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(y.data().iter().all(|&v| v >= lo && v <= hi));
    }

    #[test]
    fn minmax_normalization_lands_in_unit_interval(
        data in proptest::collection::vec(-1000.0f64..1000.0, 16..64)
    ) {
        let mut v = data;
        lanmsff::imgproc::minmax_normalize(&mut v);
        prop_assert!(v.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
