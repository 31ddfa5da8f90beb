use delay_horizon::controllers::tppf_gain;
use delay_horizon::dde_sim::{assemble_closed_loop, LinearDDE};
use delay_horizon::delay_model::{Channel, DelaySystem};
use delay_horizon::families::imaginary_axis_plant;
use delay_horizon::linalg::{cabs, eigenvalues, spectral_abscissa};
use delay_horizon::parametric_are::gain;
use delay_horizon::spectrum::{
    char_scale, char_value, lambda_max, rightmost_roots, DEFAULT_COUNT, DEFAULT_ORDER, ROOT_RESIDUAL,
};
use delay_horizon::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn closed_loop(seed: u64, n: usize) -> LinearDDE {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = imaginary_axis_plant(&mut rng, n, 1, 2, 1.5);
    let g = gain(sys.a(), &sys.reduced_input_matrix(), rng.gen_range(0.05..0.5)).unwrap();
    assemble_closed_loop(&sys, &tppf_gain(&sys, &g).unwrap().k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn reported_roots_meet_their_residual_and_pair_up(seed in any::<u64>(), n in 1usize..5) {
        let dde = closed_loop(seed, n);
        let set = rightmost_roots(&dde, DEFAULT_COUNT, DEFAULT_ORDER).unwrap();
        prop_assert!(!set.roots.is_empty());
        for r in &set.roots {
            prop_assert!(r.residual <= ROOT_RESIDUAL);
            prop_assert!((cabs(char_value(&dde, r.s)) / char_scale(&dde, r.s) - r.residual).abs() <= 1e-12);
            if r.s.im != 0.0 {
                let c = r.s.conj();
                prop_assert!(cabs(char_value(&dde, c)) / char_scale(&dde, c) <= ROOT_RESIDUAL);
            }
        }
        prop_assert!(set.roots.windows(2).all(|w| w[0].s.re >= w[1].s.re));
    }

    #[test]
    fn abscissa_is_order_consistent(seed in any::<u64>(), n in 1usize..5) {
        let dde = closed_loop(seed, n);
        let at = |order| {
            rightmost_roots(&dde, DEFAULT_COUNT, order).unwrap().roots.first().map(|r| r.s.re).unwrap()
        };
        prop_assert!((at(DEFAULT_ORDER) - at(2 * DEFAULT_ORDER)).abs() <= 1e-6);
    }

    #[test]
    fn zero_delay_abscissa_is_the_matrix_abscissa(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = imaginary_axis_plant(&mut rng, n, 1, 2, 1.5);
        let undelayed: Vec<Channel> = sys.channels().iter().map(|c| Channel { b: c.b.clone(), tau: 0.0 }).collect();
        let sys0 = DelaySystem::new(sys.a().clone(), undelayed).unwrap();
        let k = Matrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0));
        let dde = assemble_closed_loop(&sys0, &k).unwrap();
        let want = spectral_abscissa(&eigenvalues(dde.a0()).unwrap());
        prop_assert!((lambda_max(&dde).unwrap().value - want).abs() <= 1e-8);
    }
}
