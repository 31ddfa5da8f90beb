use delay_horizon::delay_model::{Channel, DelaySystem};
use delay_horizon::families::{imaginary_axis_plant, well_conditioned_similarity};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reduced_matrix_is_linear_in_the_inputs(seed in any::<u64>(), n in 1usize..7, p in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = imaginary_axis_plant(&mut rng, n, 1, p, 2.0);
        let doubled = sys.with_scaled_inputs(2.0);
        prop_assert_eq!(doubled.reduced_input_matrix(), sys.reduced_input_matrix() * 2.0);
    }

    #[test]
    fn single_undelayed_channel_is_an_ode_plant(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = imaginary_axis_plant(&mut rng, n, 1, 1, 2.0);
        prop_assert_eq!(sys.total_delay(), 0.0);
        prop_assert_eq!(sys.reduced_input_matrix(), sys.channels()[0].b.clone());
        let plain = DelaySystem::new(sys.a().clone(), vec![Channel { b: sys.channels()[0].b.clone(), tau: 0.0 }]).unwrap();
        prop_assert_eq!(plain, sys);
    }

    #[test]
    fn assumption_verdict_is_similarity_invariant(seed in any::<u64>(), n in 1usize..7, p in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = imaginary_axis_plant(&mut rng, n, 1, p, 2.0);
        let t = well_conditioned_similarity(&mut rng, n);
        let r0 = sys.check_assumptions().unwrap();
        let r1 = sys.transformed(&t).unwrap().check_assumptions().unwrap();
        prop_assert_eq!(r0.controllable, r1.controllable);
        prop_assert_eq!(r0.stabilizable, r1.stabilizable);
        prop_assert_eq!(r0.spectrum_on_axis, r1.spectrum_on_axis);
    }
}
