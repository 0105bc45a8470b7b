mod support;

use monosindex::isotonic::pava;
use proptest::prelude::*;
use support::{all_sequences, isotonic_exhaustive};

#[test]
fn pava_matches_enumeration_on_small_alphabet() {
    let mut cases = 0;
    for n in 1..=6 {
        for v in all_sequences(n, &[0.0, 1.0, 2.0]) {
            let w = vec![1.0; n];
            let fast = pava(&v, &w).unwrap();
            let slow = isotonic_exhaustive(&v, &w);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12, "{v:?}: {fast:?} vs {slow:?}");
            }
            cases += 1;
        }
    }
    assert_eq!(cases, 3 + 9 + 27 + 81 + 243 + 729);
}

#[test]
fn pava_matches_enumeration_with_integer_weights() {
    for v in all_sequences(5, &[0.0, 1.0, 2.0]) {
        for w in [[1.0, 2.0, 3.0, 1.0, 2.0], [4.0, 1.0, 1.0, 1.0, 4.0]] {
            let fast = pava(&v, &w).unwrap();
            let slow = isotonic_exhaustive(&v, &w);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12, "{v:?} {w:?}");
            }
        }
    }
}

proptest! {
    #[test]
    fn pava_matches_enumeration_on_real_inputs(
        pairs in prop::collection::vec((-5.0f64..5.0, 0.1f64..3.0), 1..9)
    ) {
        let (v, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let fast = pava(&v, &w).unwrap();
        let slow = isotonic_exhaustive(&v, &w);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}
