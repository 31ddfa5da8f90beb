use delay_horizon::dde_sim::History;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cubics_are_reproduced_and_integrated_exactly(
        c in prop::array::uniform4(-3.0f64..3.0),
        from in -5.0f64..0.0,
        len in 0.1f64..4.0,
        segments in 1usize..20,
        probe in 0.0f64..1.0,
    ) {
        let p = |t: f64| c[0] + t * (c[1] + t * (c[2] + t * c[3]));
        let dp = |t: f64| c[1] + t * (2.0 * c[2] + t * 3.0 * c[3]);
        let to = from + len;
        let h = History::from_fn(1, from, to, segments, |t| (vec![p(t)], vec![dp(t)])).unwrap();
        let t = from + probe * len;
        let scale = 1.0 + c.iter().map(|v| v.abs()).sum::<f64>() * (1.0 + from.abs() + len).powi(3);
        prop_assert!((h.eval(t).unwrap()[0] - p(t)).abs() <= 1e-12 * scale);
        let antideriv = |t: f64| t * (c[0] + t * (c[1] / 2.0 + t * (c[2] / 3.0 + t * c[3] / 4.0)));
        let want = antideriv(t) - antideriv(from);
        prop_assert!((h.integrate(from, t).unwrap()[0] - want).abs() <= 1e-11 * scale * (1.0 + len));
        prop_assert!(h.eval(to + 1e-3).is_err());
        prop_assert!(h.eval(from - 1e-3).is_err());
    }
}
