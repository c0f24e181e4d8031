use num_complex::Complex64;
use proptest::prelude::*;

use pmflow::asymptotics::fit_powerlaw;
use pmflow::grid::{to_fourier, to_physical, FourierVectorField, GridSpec};
use pmflow::landau::{beta_from_c, c_from_beta, Branch};
use pmflow::norms::{pm_norm, NormBand};
use pmflow::operators::{heat_propagate, leray_project};
use pmflow::pmns::FieldFile;

fn grid() -> GridSpec {
    GridSpec::new(8, 6.0, 2.0 / 3.0).unwrap()
}

/// A field from a coefficient seed; Hermitian so it stays real in physical space.
fn field(coeffs: &[f64]) -> FourierVectorField {
    let g = grid();
    FourierVectorField::from_symbol(g, |xi| {
        [0, 1, 2].map(|i| {
            let a = coeffs[i % coeffs.len()];
            let b = coeffs[(i + 3) % coeffs.len()];
            let ph = a * xi[0] + b * xi[1] - a * b * xi[2];
            Complex64::new(ph.cos(), ph.sin()) * (-0.2 * xi.iter().map(|v| v * v).sum::<f64>()).exp()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_power_laws_are_recovered(p in -2.0f64..2.0, c in 1e-3f64..1e3) {
        let ts: Vec<f64> = (0..20).map(|j| 10f64.powf(-1.0 + 0.15 * j as f64)).collect();
        let vs: Vec<f64> = ts.iter().map(|t| c * t.powf(p)).collect();
        let fit = fit_powerlaw(&ts, &vs).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-10);
        prop_assert!((fit.log_prefactor - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn leray_is_an_idempotent_solenoidal_projection(coeffs in prop::collection::vec(-2.0f64..2.0, 6)) {
        let u = field(&coeffs);
        let p = leray_project(&u);
        prop_assert!(p.max_divergence_ratio() < 1e-12);
        let again = leray_project(&p);
        prop_assert!(again.checked_sub(&p).unwrap().max_amplitude() <= 1e-14 * p.max_amplitude().max(1e-300));
    }

    #[test]
    fn pm_norms_are_absolutely_homogeneous(coeffs in prop::collection::vec(-2.0f64..2.0, 6), lam in -5.0f64..5.0, a in 0.0f64..3.0) {
        let u = field(&coeffs);
        let band = NormBand::default_for(&grid());
        let n = pm_norm(&u, a, &band).unwrap();
        let scaled = pm_norm(&u.scale(lam), a, &band).unwrap();
        prop_assert!((scaled - lam.abs() * n).abs() <= 1e-12 * n.max(1e-300));
    }

    #[test]
    fn heat_flow_is_a_semigroup(coeffs in prop::collection::vec(-2.0f64..2.0, 6), s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let u = field(&coeffs);
        let two = heat_propagate(&heat_propagate(&u, s).unwrap(), t).unwrap();
        let one = heat_propagate(&u, s + t).unwrap();
        prop_assert!(two.checked_sub(&one).unwrap().max_amplitude() <= 1e-14 * u.max_amplitude());
    }

    #[test]
    fn physical_round_trip_is_lossless(coeffs in prop::collection::vec(-2.0f64..2.0, 6)) {
        let u = field(&coeffs);
        let back = to_fourier(&to_physical(&u));
        prop_assert!(back.checked_sub(&u).unwrap().max_amplitude() <= 1e-12 * u.max_amplitude());
    }

    #[test]
    fn pmns_round_trip_is_bit_exact(coeffs in prop::collection::vec(-2.0f64..2.0, 6), t in 1e-3f64..1e3) {
        let u = field(&coeffs);
        let file = FieldFile::new(grid(), vec![t], vec![u]).unwrap();
        let mut bytes = Vec::new();
        file.write_to(&mut bytes).unwrap();
        prop_assert_eq!(FieldFile::read_from(bytes.as_slice()).unwrap(), file);
    }

    #[test]
    fn landau_parameter_inverts(c in 1.0001f64..1e4, negative in any::<bool>()) {
        let c = if negative { -c } else { c };
        let branch = if negative { Branch::Negative } else { Branch::Positive };
        let back = c_from_beta(beta_from_c(c).unwrap(), branch).unwrap();
        prop_assert!((back - c).abs() <= 1e-9 * c.abs());
    }
}
