use num_complex::Complex64;
use proptest::prelude::*;

use restrict_lab::rieszmap::{classify, verdicts_conflict};
use restrict_lab::specfun::{bessel_j, bessel_split, sigma_hat, BesselOrder};
use restrict_lab::symgeom::{lorentz_norm, sphere_area, CapProfile, CapRule, LorentzExponent, SymmetryParams};
use restrict_lab::transforms::extension_operator;
use restrict_lab::weightedops::oscillatory_integral;

fn block_params() -> impl Strategy<Value = SymmetryParams> {
    (4usize..=9).prop_flat_map(|d| (Just(d), 2..=d - 2)).prop_map(|(d, k)| SymmetryParams::new(d, k).unwrap())
}

fn atoms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..5.0, 0.01f64..2.0), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_recombines_to_bessel(twice_nu in 0usize..8, r in 0.01f64..300.0) {
        let o = BesselOrder::new(0.5 * twice_nu as f64).unwrap();
        let s = bessel_split(o, r).unwrap();
        let j = bessel_j(o, r).unwrap();
        prop_assert!((s.principal.re + s.remainder - j).abs() < 1e-12);
        prop_assert!(s.principal.im.abs() < 1e-12);
    }

    #[test]
    fn classification_is_block_symmetric(params in block_params(), ip in 0.0f64..=1.0, iq in 0.0f64..=1.0) {
        let (p, q) = (1.0 / ip.max(1e-9), 1.0 / iq.max(1e-9));
        let a = classify(params, p, q).unwrap();
        let b = classify(params.swapped(), p, q).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert!(!verdicts_conflict(params, ip, iq));
    }

    #[test]
    fn lorentz_scale_and_nesting(samples in atoms(), p in 1.05f64..6.0, c in 0.1f64..10.0) {
        let strong = lorentz_norm(&samples, LorentzExponent::new(p, 1.0).unwrap()).unwrap();
        let lebesgue = lorentz_norm(&samples, LorentzExponent::new(p, p).unwrap()).unwrap();
        let weak = lorentz_norm(&samples, LorentzExponent::new(p, f64::INFINITY).unwrap()).unwrap();
        prop_assert!(weak <= lebesgue * (1.0 + 1e-12) && lebesgue <= strong * (1.0 + 1e-12));
        let direct = samples.iter().map(|(v, w)| v.powf(p) * w).sum::<f64>().powf(1.0 / p);
        prop_assert!((lebesgue - direct).abs() <= 1e-10 * direct.max(1.0));
        let scaled: Vec<(f64, f64)> = samples.iter().map(|&(v, w)| (c * v, w)).collect();
        let s = lorentz_norm(&scaled, LorentzExponent::new(p, 1.0).unwrap()).unwrap();
        prop_assert!((s - c * strong).abs() <= 1e-10 * (c * strong).max(1.0));
    }

    #[test]
    fn extension_of_real_profile_is_real(params in block_params(), y in 0.0f64..30.0, z in 0.0f64..30.0, e in 0.0f64..3.0) {
        let rule = CapRule::gauss_jacobi(params, 24).unwrap();
        let f = CapProfile::from_fn(rule, |r| Complex64::new(r.powf(e), 0.0)).unwrap();
        let v = extension_operator(&f, y, z, params).unwrap();
        prop_assert!(v.im.abs() < 1e-12);
        prop_assert!(v.norm() <= extension_operator(&f, 0.0, 0.0, params).unwrap().norm() * (1.0 + 1e-12));
    }

    #[test]
    fn oscillatory_conjugate_symmetry(gamma in 0.1f64..3.0, a in 1.0f64..10.0, lambda in 0.05f64..2.0) {
        prop_assume!((gamma - 1.0).abs() > 1e-3);
        let plus = oscillatory_integral(gamma, a, lambda).unwrap();
        let minus = oscillatory_integral(gamma, a, -lambda).unwrap();
        prop_assert!((plus - minus.conj()).norm() <= 1e-12 * plus.norm().max(1.0));
    }

    #[test]
    fn sigma_hat_bounded_by_area(d in 2usize..10, r in 0.0f64..200.0) {
        let area = sphere_area(d).unwrap();
        prop_assert!(sigma_hat(d, r).unwrap().abs() <= area * (1.0 + 1e-12));
        prop_assert!((sigma_hat(d, 0.0).unwrap() - area).abs() < 1e-12 * area);
    }
}
