mod common;

use common::{composite, ops, rng};
use proptest::prelude::*;

const TOLERANCE: f64 = 1e-4;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_op_matches_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        for case in ops::op_cases() {
            let inputs = (case.inputs)(&mut r);
            let err = common::check_op(&inputs, &case.build);
            prop_assert!(err < TOLERANCE, "{}: relative error {err:e}", case.name);
        }
    }

    #[test]
    fn grad_reverse_scales_by_minus_lambda(seed in any::<u64>()) {
        let err = ops::check_grad_reverse(&mut rng(seed));
        prop_assert!(err < TOLERANCE, "relative error {err:e}");
    }
}

#[test]
fn composed_graphs_match_finite_differences() {
    for seed in 0..5 {
        for (name, err) in [
            ("tagger", composite::tagger(seed)),
            ("parser", composite::parser(seed)),
            ("reversed discriminator", composite::reversed_discriminator(seed)),
            ("gan", composite::gan(seed)),
            ("wgan", composite::wgan(seed)),
        ] {
            assert!(err < TOLERANCE, "{name}, seed {seed}: relative error {err:e}");
        }
    }
}
