//! Property tests for invariants that hold for every input.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spectral_stability::discretization::conjugated_tilde_pencil;
use spectral_stability::harness::{
    fit_loglog_slope, graph_pair_bundles, mf_concentration, random_coefficient, random_graph, Exponent,
};
use spectral_stability::linalg::{mass_orthonormalize, sqrt_spd2};
use spectral_stability::spectral::{deviation_series, schatten_norm, ResolventDifference};
use spectral_stability::{select_basis, SubspacePair};

fn pieces() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..1.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mf_is_monotone_and_bounded((areas, values) in pieces(), s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        let a = mf_concentration(&areas, &values, lo).unwrap();
        let b = mf_concentration(&areas, &values, hi).unwrap();
        let total = areas.iter().zip(&values).map(|(a, v)| a * v * v).sum::<f64>().sqrt();
        let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(a <= b + 1e-12);
        prop_assert!(b <= total + 1e-12);
        prop_assert!(a <= peak * lo.sqrt() + 1e-12);
    }

    #[test]
    fn schatten_norms_decrease_in_r(sv in prop::collection::vec(0.0f64..10.0, 1..20)) {
        let n2 = schatten_norm(&sv, 2.0);
        let n3 = schatten_norm(&sv, 3.0);
        let ninf = schatten_norm(&sv, f64::INFINITY);
        prop_assert!(ninf <= n3 * (1.0 + 1e-12));
        prop_assert!(n3 <= n2 * (1.0 + 1e-12));
    }

    #[test]
    fn deviation_series_is_symmetric_and_vanishes_on_equal_spectra(
        l in prop::collection::vec(0.0f64..100.0, 1..20),
        shift in prop::collection::vec(-0.5f64..0.5, 20),
        r in 1.0f64..6.0,
    ) {
        let lt: Vec<f64> = l.iter().zip(&shift).map(|(a, b)| a + b.abs()).collect();
        let ab = deviation_series(&l, &lt, r).unwrap().value;
        let ba = deviation_series(&lt, &l, r).unwrap().value;
        prop_assert!((ab - ba).abs() <= 1e-14 * ab.max(1.0));
        prop_assert_eq!(deviation_series(&l, &l, r).unwrap().value, 0.0);
    }

    #[test]
    fn loglog_fit_recovers_power_laws(slope in -3.0f64..3.0, c in 0.1f64..10.0) {
        let xs = [0.1f64, 0.05, 0.025, 0.0125];
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(slope)).collect();
        let fit = fit_loglog_slope(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn spd_square_root_squares_back(a in 0.1f64..5.0, d in 0.1f64..5.0, t in -0.99f64..0.99) {
        let b = t * (a * d).sqrt();
        let m = Matrix2::new(a, b, b, d);
        let s = sqrt_spd2(&m).unwrap();
        prop_assert!((s * s - m).abs().max() < 1e-12);
        prop_assert!((s - s.transpose()).abs().max() < 1e-15);
    }

    #[test]
    fn exponent_round_trips_through_json(x in prop_oneof![Just(f64::INFINITY), 1.0f64..10.0]) {
        let e = Exponent(x);
        let back: Exponent = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        prop_assert_eq!(back.0, x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_bound_holds(seed in any::<u64>(), m in 1usize..4, noise in 1e-4f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 12;
        let mass = DVector::from_fn(n, |i, _| 0.5 + (i as f64 * 0.37).sin().abs());
        let u = mass_orthonormalize(&DMatrix::from_fn(n, m, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0)), &mass, 1e-10);
        let v = mass_orthonormalize(
            &(&u + DMatrix::from_fn(n, m, |_, _| noise * rand::Rng::random_range(&mut rng, -1.0..1.0))),
            &mass,
            1e-10,
        );
        prop_assume!(u.ncols() == m && v.ncols() == m);
        let pair = SubspacePair::new(mass, u, v).unwrap();
        let sel = select_basis(&pair).unwrap();
        if !sel.vacuous {
            for (k, d) in sel.distances.iter().enumerate() {
                prop_assert!(*d <= 5f64.powi(k as i32 + 1) * sel.projector_distance + 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn series_never_exceeds_the_schatten_norm(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g1 = random_graph(&mut rng);
        let g2 = random_graph(&mut rng);
        let a = random_coefficient(&mut rng);
        let b = graph_pair_bundles(&g1, &g2, &a, 7, 6).unwrap();
        let conj = conjugated_tilde_pencil(&b.tilde, &b.base);
        let rd = ResolventDifference::new(&b.base.pencil(), &conj).unwrap();
        let l: Vec<f64> = rd.base.values.iter().copied().collect();
        let lt: Vec<f64> = rd.tilde.values.iter().copied().collect();
        for r in [2.0, 3.0, f64::INFINITY] {
            let series = deviation_series(&l, &lt, r).unwrap().value;
            let schatten = rd.report(Complex64::new(-1.0, 0.0), r).unwrap().value;
            prop_assert!(series <= schatten + 1e-10, "r = {}: {} > {}", r, series, schatten);
        }
    }
}
