mod common;

use std::collections::BTreeSet;

use citysim_core::belief::parse;
use citysim_core::verify::{evaluate, is_consistent, verify, FixedTheory, VerificationReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn minimal_core_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..600 {
        let text = common::random_program(&mut rng, 12);
        let r = common::check_core(&text);
        assert!(r.ok, "{}", r.detail);
        worst = worst.max(r.checks as f64 / r.bound);
    }
    assert!(worst <= 1.0);
}

#[test]
fn evaluator_matches_both_fixpoint_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let theory = FixedTheory::default();
    for _ in 0..150 {
        let text = common::random_unplanted(&mut rng, 8);
        let program = parse(&text).unwrap();
        let model = evaluate(&program, &theory).unwrap();
        let backtracking = common::oracle_model(&program);
        assert_eq!(model.atoms, backtracking, "{text}");
        assert_eq!(common::brute_model(&program), backtracking, "{text}");
    }
}

#[test]
fn consistency_agrees_with_oracle_on_unplanted_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let theory = FixedTheory::default();
    let mut both = [0usize; 2];
    for _ in 0..400 {
        let text = common::random_unplanted(&mut rng, 10);
        let program = parse(&text).unwrap();
        let all: BTreeSet<usize> = (0..program.len()).collect();
        let expected = !common::oracle_inconsistent(&program, &all);
        assert_eq!(is_consistent(&program, &all, &theory).unwrap(), expected, "{text}");
        both[usize::from(expected)] += 1;
        let report = verify(&text, &theory);
        assert_eq!(report.is_consistent(), expected);
        if let VerificationReport::Inconsistent { explanation, .. } = report {
            assert!(explanation.contains("Conflicting statements:"));
        }
    }
    // the generator has to exercise both outcomes
    assert!(both[0] > 20 && both[1] > 20, "{both:?}");
}
