use delay_horizon::dde_sim::{assemble_closed_loop, simulate, History, LinearDDE};
use delay_horizon::delay_model::{Channel, DelaySystem};
use delay_horizon::families::imaginary_axis_plant;
use delay_horizon::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn splitting_a_channel_leaves_the_closed_loop_unchanged(seed in any::<u64>(), n in 1usize..6, p in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = imaginary_axis_plant(&mut rng, n, 1, p, 2.0);
        let k = Matrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0));
        let pick = rng.gen_range(0..sys.channels().len());
        let mut chans = Vec::new();
        for (i, c) in sys.channels().iter().enumerate() {
            if i == pick {
                chans.push(Channel { b: &c.b / 2.0, tau: c.tau });
                chans.push(Channel { b: &c.b / 2.0, tau: c.tau });
            } else {
                chans.push(c.clone());
            }
        }
        let split = DelaySystem::new(sys.a().clone(), chans).unwrap();
        prop_assert_eq!(assemble_closed_loop(&split, &k).unwrap(), assemble_closed_loop(&sys, &k).unwrap());
    }

    #[test]
    fn simulation_is_linear_in_the_history(seed in any::<u64>(), alpha in -4.0f64..4.0, tau in 0.2f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a0 = Matrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let a1 = Matrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let dde = LinearDDE::new(a0, vec![(a1, tau)]).unwrap();
        let (w1, w2): (f64, f64) = (rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0));
        let phi = |s: f64| (vec![s.sin() * w1, (w2 * s).cos()], vec![s.cos() * w1, -w2 * (w2 * s).sin()]);
        let base = History::from_fn(2, -tau, 0.0, 40, phi).unwrap();
        let scaled = History::from_fn(2, -tau, 0.0, 40, |s| {
            let (v, d) = phi(s);
            (v.iter().map(|x| x * alpha).collect(), d.iter().map(|x| x * alpha).collect())
        })
        .unwrap();
        let x = simulate(&dde, &base, 5.0, 0.05).unwrap();
        let y = simulate(&dde, &scaled, 5.0, 0.05).unwrap();
        for (p, q) in x.states.iter().zip(&y.states) {
            let scale = p.iter().map(|v| v.abs()).fold(0.0, f64::max) * alpha.abs();
            for (u, v) in p.iter().zip(q) {
                prop_assert!((u * alpha - v).abs() <= 1e-10 * scale.max(1e-300));
            }
        }
    }
}

#[test]
fn fourth_order_convergence() {
    let terminal = |dde: &LinearDDE, init: &History, h: f64| simulate(dde, init, 4.0, h).unwrap().final_state().to_vec();
    let err = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let cases = [
        (
            LinearDDE::ode(Matrix::from_row_slice(2, 2, &[0.1, 2.0, -2.0, -0.4])).unwrap(),
            History::constant(&[1.0, -0.5], 0.0, 0.0).unwrap(),
            12.0,
        ),
        (
            LinearDDE::new(Matrix::from_element(1, 1, -0.5), vec![(Matrix::from_element(1, 1, -1.0), 0.8)]).unwrap(),
            History::constant(&[1.0], -0.8, 0.0).unwrap(),
            8.0,
        ),
    ];
    for (dde, init, factor) in cases {
        let h = 0.1;
        let reference = terminal(&dde, &init, h / 16.0);
        let e1 = err(&terminal(&dde, &init, h), &reference);
        let e2 = err(&terminal(&dde, &init, h / 2.0), &reference);
        assert!(e1 / e2 >= factor, "ratio {}", e1 / e2);
    }
}
