use std::f64::consts::PI;

use proptest::prelude::*;

use critheat::spectral::{
    apply_multiplier, dealias, heat_multiplier, lebesgue_norm, power_multiplier, sobolev_norm_sq,
    transform_forward, transform_inverse, PhysicalField, TorusGrid,
};

type Mode = ([i64; 4], f64, f64);

fn modes() -> impl Strategy<Value = Vec<Mode>> {
    prop::collection::vec(
        (prop::array::uniform4(-7i64..=7), -1.0f64..1.0, 0.0f64..(2.0 * PI)),
        1..6,
    )
}

fn field(grid: TorusGrid, modes: &[Mode]) -> PhysicalField {
    let dxi = grid.frequency_spacing();
    PhysicalField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(k, a, phase)| {
                let arg: f64 = (0..4).map(|i| dxi * k[i] as f64 * x[i]).sum();
                a * (arg + phase).cos()
            })
            .sum()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn roundtrip(m in modes(), side in 1.0f64..50.0) {
        let g = TorusGrid::new(16, side).unwrap();
        let u = field(g, &m);
        let back = transform_inverse(&transform_forward(&u).unwrap()).unwrap();
        let scale = u.max_abs().max(1.0);
        for (a, b) in u.values.iter().zip(&back.values) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn plancherel(m in modes(), side in 1.0f64..50.0) {
        let g = TorusGrid::new(16, side).unwrap();
        let u = field(g, &m);
        let physical = lebesgue_norm(&u, 2.0).unwrap().powi(2);
        let spectral = sobolev_norm_sq(&transform_forward(&u).unwrap(), 0.0).unwrap();
        prop_assert!((physical - spectral).abs() <= 1e-11 * physical.max(1e-300));
    }

    #[test]
    fn heat_semigroup(m in modes(), s in 0.0f64..0.5, t in 0.0f64..0.5) {
        let g = TorusGrid::new(16, 2.0 * PI).unwrap();
        let v = transform_forward(&field(g, &m)).unwrap();
        let two = apply_multiplier(&apply_multiplier(&v, &heat_multiplier(s)).unwrap(), &heat_multiplier(t)).unwrap();
        let one = apply_multiplier(&v, &heat_multiplier(s + t)).unwrap();
        let scale = v.max_abs();
        for (a, b) in two.coeffs.iter().zip(&one.coeffs) {
            prop_assert!((a - b).norm() <= 1e-12 * scale);
        }
        prop_assert!(sobolev_norm_sq(&one, 1.0).unwrap() <= sobolev_norm_sq(&v, 1.0).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn sobolev_weights(m in modes(), s in -1.0f64..2.0) {
        let g = TorusGrid::new(16, 2.0 * PI).unwrap();
        let mut v = transform_forward(&field(g, &m)).unwrap();
        v.coeffs[0] = 0.0.into();
        let lifted = apply_multiplier(&v, &power_multiplier(s)).unwrap();
        let direct = sobolev_norm_sq(&v, s).unwrap();
        let via = sobolev_norm_sq(&lifted, 0.0).unwrap();
        prop_assert!((direct - via).abs() <= 1e-11 * direct.max(1e-300));
    }

    #[test]
    fn dealias_is_a_projection(m in modes()) {
        let g = TorusGrid::new(16, 3.0).unwrap();
        let v = transform_forward(&field(g, &m)).unwrap();
        let once = dealias(&v);
        prop_assert_eq!(dealias(&once), once.clone());
        prop_assert!(sobolev_norm_sq(&once, 0.0).unwrap() <= sobolev_norm_sq(&v, 0.0).unwrap() * (1.0 + 1e-14));
    }
}
