use paralens::check::{
    axiom_suite, coherence_suite, grad_check, random_composite, random_probes, z2_oracle_suite,
    FD_STEP, FD_TOLERANCE, REAL_AXIOM_TOLERANCE,
};
use paralens::{Interface, Lens, Tensor, Z2};
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

#[test]
fn identity_lens_has_zero_deviation() {
    let id = Lens::<f64>::identity(Interface::symmetric([3]));
    let mut rng = SplitMix64::seed_from_u64(1);
    let r = grad_check(&id, &random_probes(&id, 4, &mut rng), FD_STEP, FD_TOLERANCE).unwrap();
    assert!(r.max_rel_err < 1e-9, "{r:?}");
    assert_eq!(r.coordinates, 12);
}

#[test]
fn wrong_backward_is_reported() {
    let bad = Lens::<f64>::new(
        "bad_square",
        Interface::symmetric([1]),
        Interface::symmetric([1]),
        |x| Ok(x.map(|v| v * v)),
        |x, d| Ok(Tensor::from_vec(vec![3.0 * x.data()[0] * d.data()[0]])),
    );
    let probe = (Tensor::from_vec(vec![1.0]), Tensor::from_vec(vec![1.0]));
    let err = grad_check(&bad, &[probe], FD_STEP, FD_TOLERANCE).unwrap_err();
    assert!(err.to_string().contains("bad_square"));
}

#[test]
fn relu_kink_is_skipped_not_failed() {
    let relu = paralens::smooth::activation(paralens::tensor::Pointwise::Relu, 1).unwrap();
    let probe = (Tensor::from_vec(vec![2e-7]), Tensor::from_vec(vec![1.0]));
    let r = grad_check(relu.lens(), &[probe], FD_STEP, FD_TOLERANCE).unwrap();
    assert_eq!((r.skipped, r.coordinates), (1, 0));
}

#[test]
fn random_composites_pass_finite_differences() {
    let mut rng = SplitMix64::seed_from_u64(7);
    for _ in 0..30 {
        let (chain, f) = random_composite(&mut rng).unwrap();
        let probes = random_probes(f.lens(), 2, &mut rng);
        grad_check(f.lens(), &probes, FD_STEP, FD_TOLERANCE)
            .unwrap_or_else(|e| panic!("{chain:?}: {e}"));
    }
}

#[test]
fn axioms_hold_on_both_backends() {
    let mut rng = SplitMix64::seed_from_u64(11);
    for row in axiom_suite::<f64, _>(&mut rng, 40).unwrap() {
        assert!(row.max_deviation <= REAL_AXIOM_TOLERANCE, "{row:?}");
    }
    for row in axiom_suite::<Z2, _>(&mut rng, 40).unwrap() {
        assert_eq!(row.max_deviation, 0.0, "{row:?}");
    }
}

#[test]
fn coherence_holds_on_both_backends() {
    let mut rng = SplitMix64::seed_from_u64(12);
    let r = coherence_suite::<f64, _>(&mut rng, 30).unwrap();
    assert!(r.max_deviation <= 1e-12, "{r:?}");
    let r = coherence_suite::<Z2, _>(&mut rng, 30).unwrap();
    assert_eq!(r.max_deviation, 0.0);
}

#[test]
fn circuits_agree_with_symbolic_partials() {
    let mut rng = SplitMix64::seed_from_u64(13);
    assert_eq!(z2_oracle_suite(&mut rng, 20).unwrap(), (0, 0));
}

#[test]
fn every_primitive_passes_finite_differences() {
    let mut rng = SplitMix64::seed_from_u64(3);
    for l in paralens::check::smooth_primitives().unwrap() {
        let probes = random_probes(&l, 3, &mut rng);
        grad_check(&l, &probes, FD_STEP, FD_TOLERANCE).unwrap();
    }
}
