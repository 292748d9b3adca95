use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qcarrier::cli::io::fmt_num;
use qcarrier::environment::{
    apply_local_unitary, build_flip, exchange, flip_decompose, flip_expectation, twirl, witness_entanglement, EnvState,
    Witness,
};
use qcarrier::linalg::{max_abs_diff, partial_trace, tensor, ComplexMatrix, Keep};
use qcarrier::protocol::{
    erase, make_source, make_target, measure_and_feedforward, partial_exchange, transfer_analytic, EquatorialPhase,
};
use qcarrier::sample;
use qcarrier::spectral::{beam_splitter_coincidence, FilterShape, SpectralModel};
use qcarrier::tomography::{expected_counts, mle_reconstruct, ALL_BASES};

fn env_from(seed: u64, d: usize, rank: usize) -> EnvState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = d * d;
    EnvState::new(d, d, sample::random_density_with_rank(&mut rng, n, rank.clamp(1, n))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn d_is_bounded(seed in any::<u64>(), d in 1usize..6, rank in 1usize..5) {
        let env = env_from(seed, d, rank);
        let dd = flip_expectation(&env).unwrap();
        prop_assert!((-1.0 - 1e-10..=1.0 + 1e-10).contains(&dd));
        let dec = flip_decompose(&env).unwrap();
        prop_assert!((dec.p_sym + dec.p_anti - 1.0).abs() < 1e-12);
        prop_assert!((dec.p_sym - dec.p_anti - dd).abs() < 1e-12);
        if dd < -1e-9 {
            prop_assert_eq!(witness_entanglement(&env).unwrap(), Witness::Witnessed);
        }
    }

    #[test]
    fn separable_mixtures_have_nonnegative_d(seed in any::<u64>(), d in 2usize..5, terms in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let env = EnvState::new(d, d, sample::random_separable(&mut rng, d, terms)).unwrap();
        prop_assert!(flip_expectation(&env).unwrap() >= -1e-12);
    }

    #[test]
    fn flip_is_an_involution(d in 1usize..9) {
        let f = build_flip(d);
        prop_assert_eq!(&f * &f, ComplexMatrix::identity(d * d, d * d));
        prop_assert_eq!(f.adjoint(), f);
    }

    #[test]
    fn identical_local_unitaries_preserve_d(seed in any::<u64>(), d in 2usize..5) {
        let env = env_from(seed, d, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let u = sample::haar_unitary(&mut rng, d);
        let moved = apply_local_unitary(&env, &u, &u).unwrap();
        prop_assert!((flip_expectation(&moved).unwrap() - flip_expectation(&env).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn twirl_is_a_d_preserving_projection(seed in any::<u64>(), d in 1usize..5) {
        let env = env_from(seed, d, 2);
        let w = twirl(&env).unwrap();
        prop_assert!((flip_expectation(&w).unwrap() - flip_expectation(&env).unwrap()).abs() < 1e-12);
        prop_assert!(max_abs_diff(twirl(&w).unwrap().rho().matrix(), w.rho().matrix()) < 1e-12);
    }

    #[test]
    fn exchange_preserves_d(seed in any::<u64>(), d in 1usize..5) {
        let env = env_from(seed, d, 3);
        let x = exchange(&env).unwrap();
        prop_assert!((flip_expectation(&x).unwrap() - flip_expectation(&env).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_undoes_tensor(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sample::random_density(&mut rng, da);
        let b = sample::random_density(&mut rng, db);
        let ab = tensor(&a, &b);
        prop_assert!(max_abs_diff(partial_trace(&ab, (da, db), Keep::A).unwrap().matrix(), a.matrix()) < 1e-12);
        prop_assert!(max_abs_diff(partial_trace(&ab, (da, db), Keep::B).unwrap().matrix(), b.matrix()) < 1e-12);
    }

    #[test]
    fn composite_matches_closed_form(seed in any::<u64>(), d in 1usize..5, theta in 0.0..std::f64::consts::TAU) {
        let env = env_from(seed, d, 1 + (seed % 4) as usize);
        let th = EquatorialPhase::from_radians(theta);
        let ex = partial_exchange(&make_source(th), &make_target(), &env).unwrap();
        prop_assert!((ex.success_probability() - 0.5).abs() < 1e-12);
        let dd = flip_expectation(&env).unwrap();
        for comp in [false, true] {
            let sim = measure_and_feedforward(&ex, comp);
            let ana = transfer_analytic(th, dd, comp).unwrap();
            prop_assert!(max_abs_diff(sim.rho_corrected.matrix(), ana.rho_corrected.matrix()) < 1e-11);
            let mirror = erase(&ex, comp);
            prop_assert!(max_abs_diff(mirror.rho_corrected.matrix(), sim.rho_corrected.matrix()) < 1e-12);
        }
    }

    #[test]
    fn output_spectrum(d in -1.0f64..=1.0, theta in 0.0..std::f64::consts::TAU) {
        let th = EquatorialPhase::from_radians(theta);
        let out = transfer_analytic(th, d, false).unwrap();
        prop_assert!((out.overlap(th) - 0.5 * (1.0 + d)).abs() < 1e-12);
        let ev = out.rho_corrected.eigenvalues();
        prop_assert!((ev[0] - 0.5 * (1.0 + d.abs())).abs() < 1e-12);
        prop_assert!((ev[1] - 0.5 * (1.0 - d.abs())).abs() < 1e-12);
        prop_assert!((out.purity() - 0.5 * (1.0 + d * d)).abs() < 1e-12);
        let comp = transfer_analytic(th, d, true).unwrap();
        prop_assert!((comp.overlap(th) - 0.5 * (1.0 + d.abs())).abs() < 1e-12);
    }

    #[test]
    fn coincidence_probability_is_a_probability(seed in any::<u64>(), d in 1usize..5) {
        let env = env_from(seed, d, 2);
        let pc = beam_splitter_coincidence(&env).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&pc));
        prop_assert!((pc - 0.5 * (1.0 - flip_expectation(&env).unwrap())).abs() < 1e-10);
    }

    #[test]
    fn csv_numbers_round_trip(x in -1e6f64..1e6) {
        let back: f64 = fmt_num(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs().max(f64::MIN_POSITIVE));
        prop_assert_eq!(fmt_num(back), fmt_num(x));
    }

    #[test]
    fn likelihood_fixed_point(d in -1.0f64..=1.0, theta in 0.0..std::f64::consts::TAU) {
        let th = EquatorialPhase::from_radians(theta);
        let truth = transfer_analytic(th, 0.999 * d, false).unwrap().rho_corrected;
        let recs = expected_counts(&truth, &ALL_BASES, 1e6, [1.0, 1.0]).unwrap();
        let res = mle_reconstruct(&recs, 100_000, 1e-18).unwrap();
        prop_assert!(max_abs_diff(res.rho_rec.matrix(), truth.matrix()) < 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dip_is_even_in_delay(dt in 0.0f64..2.0) {
        let model = SpectralModel::new(FilterShape::rectangular(810.0, 2.7).unwrap(), 1024, 1.0).unwrap();
        let a = model.flip_expectation(dt).unwrap();
        let b = model.flip_expectation(-dt).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a <= 1.0 + 1e-12);
    }
}
