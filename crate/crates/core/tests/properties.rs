use std::sync::OnceLock;

use proptest::prelude::*;
use shrinker_lab::cylinder::{build_grid, cutoff, CylinderGrid};
use shrinker_lab::field::NormalField;
use shrinker_lab::graphgeom::{compute_p, evaluate_geometry, grad_tau_norm, GeometryOptions};
use shrinker_lab::harness::interp::interpolation_exponent;
use shrinker_lab::harness::{loglog_slope, ExperimentConfig};
use shrinker_lab::jacobi::{inner, jacobi_operator, l2_norm};
use shrinker_lab::profile::{
    export_curve, import_curve, ProfileCurve, ProfileKind, ProfileSpec,
};
use shrinker_lab::cylinder::Region;
use shrinker_lab::LabError;

fn grid() -> &'static CylinderGrid {
    static G: OnceLock<CylinderGrid> = OnceLock::new();
    G.get_or_init(|| build_grid(ProfileCurve::circle(2f64.sqrt(), 64), 12.0, 97, 4).unwrap())
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn admissible_pairs(p in 1u32..40, q in 1u32..40) {
        let r = p as f64 / q as f64;
        let ok = gcd(p, q) == 1 && r > 0.5 && r < std::f64::consts::FRAC_1_SQRT_2;
        let res = ProfileSpec::abresch_langer(p, q, 1e-8).validate();
        prop_assert_eq!(res.is_ok(), ok);
        if !ok {
            let is_no_curve = matches!(res, Err(LabError::NoSuchCurve { .. }));
            prop_assert!(is_no_curve);
        }
    }

    #[test]
    fn interpolation_exponent_range(m in 1usize..60, j in 0usize..60, n in 1usize..4) {
        prop_assume!(j <= m);
        let a = interpolation_exponent(m, j, n);
        prop_assert!((0.0..1.0).contains(&a));
        if j < m {
            prop_assert!(interpolation_exponent(m + 1, j, n) > a);
        }
    }

    #[test]
    fn cutoff_is_monotone_in_radius(t in -20.0f64..20.0, r in 1.0f64..10.0, dr in 0.0f64..3.0) {
        let a = cutoff(t, r);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(cutoff(t, r + dr) >= a);
        prop_assert_eq!(cutoff(t, r), cutoff(-t, r));
    }

    #[test]
    fn power_law_slope(k in -4.0f64..4.0, c in 0.1f64..10.0) {
        let x = [1e-3f64, 3e-3, 1e-2, 3e-2, 1e-1];
        let y: Vec<f64> = x.iter().map(|v| c * v.powf(k)).collect();
        prop_assert!((loglog_slope(&x, &y) - k).abs() < 1e-10);
    }

    #[test]
    fn curve_file_roundtrip(r in 0.5f64..3.0, nodes in 16usize..200) {
        let c = ProfileCurve::circle(r, nodes);
        let back = import_curve(&export_curve(&c)).unwrap();
        prop_assert_eq!(back.len(), c.len());
        prop_assert_eq!(back.length, c.length);
        prop_assert_eq!(&back.points, &c.points);
        prop_assert_eq!(&back.kappa, &c.kappa);
    }

    #[test]
    fn config_roundtrip(seed in 0u64..1000, r in 8.0f64..16.0, kappa in 0.1f64..1.0) {
        let mut cfg = ExperimentConfig::default();
        cfg.family.seed = seed;
        cfg.r = r;
        cfg.kappa_exponent = kappa;
        cfg.cylinder.profile = ProfileKind::AbreschLanger { p: 2, q: 3 };
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        prop_assert_eq!(back.to_toml_string(), cfg.to_toml_string());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn jacobi_operator_is_linear(s1 in 0u64..100, s2 in 0u64..100, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = grid();
        let u = NormalField::random_smooth(g, s1, 6.0, true).unwrap();
        let v = NormalField::random_smooth(g, s2, 6.0, true).unwrap();
        let w = NormalField::combination(g, &[(a, &u), (b, &v)]).unwrap();
        let lw = jacobi_operator(g, &w);
        let expected = NormalField::combination(
            g,
            &[(a, &jacobi_operator(g, &u)), (b, &jacobi_operator(g, &v)), (-1.0, &lw)],
        )
        .unwrap();
        prop_assert!(l2_norm(g, &expected) <= 1e-10 * (1.0 + l2_norm(g, &lw)));
    }

    #[test]
    fn jacobi_operator_is_symmetric(s1 in 0u64..100, s2 in 0u64..100) {
        // L is self-adjoint for the Gaussian weight; compactly supported
        // fields make the boundary terms vanish
        let g = grid();
        let u = NormalField::random_smooth(g, s1, 6.0, true).unwrap();
        let v = NormalField::random_smooth(g, s2, 6.0, true).unwrap();
        let a = inner(g, &jacobi_operator(g, &u), &v);
        let b = inner(g, &u, &jacobi_operator(g, &v));
        prop_assert!((a - b).abs() <= 1e-3 * (a.abs() + b.abs() + 1e-12), "{} vs {}", a, b);
    }

    #[test]
    fn codimension_one_graphs_have_no_p(seed in 0u64..1000, amp in 1e-4f64..0.04) {
        let g = grid();
        let u = NormalField::random_smooth(g, seed, 6.0, false).unwrap().normalized_c2(amp).unwrap();
        let state = evaluate_geometry(g, &u, &GeometryOptions::default()).unwrap();
        let worst = compute_p(&state).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(worst < 1e-12, "P = {:e}", worst);
    }

    #[test]
    fn grad_tau_is_rotation_invariant(seed in 0u64..1000, shift in 1usize..64) {
        // rotating the field around the round cylinder leaves the integral alone
        let g = grid();
        let u = NormalField::random_smooth(g, seed, 6.0, true).unwrap().normalized_c2(0.02).unwrap();
        let rot = |f: &[f64]| -> Vec<f64> {
            (0..g.len())
                .map(|n| {
                    let (i, j) = g.ij(n);
                    f[g.idx((i + shift) % g.ns, j)]
                })
                .collect()
        };
        let v = NormalField::new(g, rot(&u.u), u.uz.as_deref().map(rot), u.support_radius).unwrap();
        let opts = GeometryOptions::default();
        let a = grad_tau_norm(&evaluate_geometry(g, &u, &opts).unwrap(), g, Region::Entire).value;
        let b = grad_tau_norm(&evaluate_geometry(g, &v, &opts).unwrap(), g, Region::Entire).value;
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300), "{} vs {}", a, b);
    }

    #[test]
    fn too_large_fields_are_rejected(seed in 0u64..1000, amp in 0.06f64..1.0) {
        let g = grid();
        let u = NormalField::random_smooth(g, seed, 6.0, true).unwrap().normalized_c2(amp).unwrap();
        let rejected = matches!(
            evaluate_geometry(g, &u, &GeometryOptions::default()),
            Err(LabError::GraphRegularity { .. })
        );
        prop_assert!(rejected);
    }
}
