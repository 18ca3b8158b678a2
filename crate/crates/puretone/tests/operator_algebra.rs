use std::f64::consts::PI;

use nalgebra::Matrix2;
use proptest::prelude::*;
use puretone::lindiv::{divisor_pc, jump_matrix, quarter, rotation, Flavor};
use puretone::profiles::PiecewiseConstantProfile;
use puretone::timeseries::FourierTimeSeries;

const N: usize = 8;

fn series() -> impl Strategy<Value = FourierTimeSeries> {
    (
        0.5f64..10.0,
        prop::collection::vec(-1.0f64..1.0, N + 1),
        prop::collection::vec(-1.0f64..1.0, N),
    )
        .prop_map(|(period, a, b)| FourierTimeSeries::from_coefficients(period, a, b).unwrap())
}

fn pair() -> impl Strategy<Value = (FourierTimeSeries, FourierTimeSeries)> {
    (series(), prop::collection::vec(-1.0f64..1.0, 2 * N + 1)).prop_map(|(f, c)| {
        let g = FourierTimeSeries::from_coefficients(f.period(), c[..=N].to_vec(), c[N + 1..].to_vec()).unwrap();
        (f, g)
    })
}

fn gap(a: &FourierTimeSeries, b: &FourierTimeSeries) -> f64 {
    a.add(&b.scale(-1.0)).unwrap().max_coeff()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn reflection_is_an_involution(f in series()) {
        prop_assert_eq!(f.reflect().reflect(), f);
    }

    #[test]
    fn shifts_form_a_group(f in series(), a in -20.0f64..20.0, b in -20.0f64..20.0) {
        prop_assert!(gap(&f.shift(a).shift(b), &f.shift(a + b)) < 1e-12);
        prop_assert!(gap(&f.shift(a).shift(-a), &f) < 1e-12);
        prop_assert!(gap(&f.shift(f.period()), &f) < 1e-12);
    }

    #[test]
    fn shift_and_reflection_are_isometries((f, g) in pair(), a in -5.0f64..5.0) {
        let base = f.inner_product(&g).unwrap();
        let scale = f.inner_product(&f).unwrap().sqrt() * g.inner_product(&g).unwrap().sqrt() + 1e-300;
        let shifted = f.shift(a).inner_product(&g.shift(a)).unwrap();
        let reflected = f.reflect().inner_product(&g.reflect()).unwrap();
        prop_assert!((shifted - base).abs() <= 1e-12 * scale);
        prop_assert!((reflected - base).abs() <= 1e-12 * scale);
    }

    #[test]
    fn parity_split_is_exact(f in series()) {
        let (e, o) = (f.project_even(), f.project_odd());
        prop_assert!(e.is_even() && o.is_odd());
        prop_assert_eq!(e.project_even(), e.clone());
        prop_assert_eq!(o.project_odd(), o.clone());
        prop_assert_eq!(e.add(&o).unwrap(), f.clone());
        // Reflection preserves each parity class.
        prop_assert_eq!(e.reflect(), e);
        prop_assert_eq!(o.reflect(), o.scale(-1.0));
    }

    #[test]
    fn jump_scales_only_the_odd_part(f in series(), j in 0.1f64..10.0) {
        let g = f.apply_scalar_jump(j).unwrap();
        prop_assert_eq!(g.project_even(), f.project_even());
        prop_assert!(gap(&g.project_odd(), &f.project_odd().scale(j)) < 1e-15);
        prop_assert!(gap(&g.apply_scalar_jump(1.0 / j).unwrap(), &f) < 1e-14);
    }

    #[test]
    fn transfer_matrix_identities(angle in -50.0f64..50.0, j in 0.05f64..20.0) {
        let r = rotation(angle);
        prop_assert!((r.transpose() * r - Matrix2::identity()).amax() < 1e-14);
        prop_assert!((jump_matrix(j) * jump_matrix(1.0 / j) - Matrix2::identity()).amax() < 1e-14);
        prop_assert!((rotation(angle) * quarter() - rotation(angle + PI / 2.0)).amax() < 1e-12);
    }

    #[test]
    fn splitting_a_layer_does_not_change_divisors(
        w0 in 0.1f64..1.0, w1 in 0.1f64..1.0, cut in 0.1f64..0.9, j in 0.2f64..5.0, t in 1.0f64..8.0,
    ) {
        let whole = PiecewiseConstantProfile::new(vec![w0, w1], vec![j]).unwrap();
        let split = PiecewiseConstantProfile::new(vec![w0 * cut, w0 * (1.0 - cut), w1], vec![1.0, j]).unwrap();
        for k in 1..=6 {
            for flavor in [Flavor::PeriodicTile, Flavor::Acoustic] {
                let a = divisor_pc(&whole, t, k, flavor);
                let b = divisor_pc(&split, t, k, flavor);
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn samples_round_trip(f in series()) {
        let values = f.to_samples(4 * N).unwrap();
        let back = FourierTimeSeries::from_samples(f.period(), &values, N).unwrap();
        prop_assert!(gap(&back, &f) < 1e-13);
    }
}
