use proptest::prelude::*;
use szego_spectral::curve::SpectralCurve;
use szego_spectral::linalg::{CMat, C64};
use szego_spectral::periods::reduce_mod_lattice;
use szego_spectral::poly::Poly;
use szego_spectral::ratmat::{lambda_from_mu, mu_from_lambda, random_phase_point, PhasePoint};
use szego_spectral::symplectic::verify_induced_kk;
use szego_spectral::theta::{Characteristic, ThetaContext};
use szego_spectral::transform::roundtrip;

fn c64() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn tau2() -> CMat {
    CMat::from_row_slice(
        2,
        2,
        &[C64::new(0.3, 1.1), C64::new(-0.2, 0.35), C64::new(-0.2, 0.35), C64::new(0.45, 0.9)],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mu_lambda_inverse(rows in prop::collection::vec(prop::collection::vec(c64(), 1..4), 1..6)) {
        let lambda: Vec<Vec<C64>> = rows
            .into_iter()
            .map(|mut r| {
                let s: C64 = r.iter().sum();
                r.push(-s);
                r
            })
            .collect();
        let back = lambda_from_mu(&mu_from_lambda(&lambda, 1e-12).unwrap());
        for (a, b) in lambda.iter().flatten().zip(back.iter().flatten()) {
            prop_assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn traceless_violation_rejected(l in c64(), d in 0.1..1.0f64) {
        prop_assert!(mu_from_lambda(&[vec![l, -l + d]], 1e-12).is_err());
    }

    #[test]
    fn poly_roots_recovered(roots in prop::collection::vec(c64(), 1..7)) {
        let p = Poly::from_roots(&roots, C64::new(1.0, 0.0));
        for r in p.roots(1e-12) {
            prop_assert!(p.eval(r).norm() < 1e-9 * p.max_abs_coeff());
        }
    }

    #[test]
    fn theta_parity_and_quasi_periodicity(z0 in c64(), z1 in c64()) {
        let ctx = ThetaContext::new(&tau2(), 1e-12).unwrap();
        let z = [z0, z1];
        for ch in Characteristic::all(2) {
            let a = ctx.eval(&ch, &z, 0).unwrap().materialize();
            let b = ctx.eval(&ch, &[-z0, -z1], 0).unwrap().materialize();
            let sign = if ch.is_odd() { -1.0 } else { 1.0 };
            prop_assert!((a - sign * b).norm() < 1e-11 * a.norm().max(1.0));
            for k in 0..2 {
                prop_assert!(ctx.quasi_periodicity_residual(&ch, &z, k).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn lattice_reduction_recovers_shift(v0 in c64(), v1 in c64(), n in prop::array::uniform2(-3i64..4), m in prop::array::uniform2(-3i64..4)) {
        let tau = tau2();
        let base = reduce_mod_lattice(&tau, &[v0, v1]).reduced;
        let shifted: Vec<C64> = (0..2)
            .map(|a| base[a] + n[a] as f64 + tau[(a, 0)] * m[0] as f64 + tau[(a, 1)] * m[1] as f64)
            .collect();
        let r = reduce_mod_lattice(&tau, &shifted);
        for a in 0..2 {
            prop_assert!((r.reduced[a] - base[a]).norm() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seeded_curves_have_expected_counts(m in 4usize..7, seed in 0u64..1000) {
        let p = random_phase_point(2, m, seed).unwrap();
        let c = SpectralCurve::build(&p.assemble().unwrap()).unwrap();
        prop_assert_eq!(c.genus, m - 3);
        prop_assert_eq!(c.branch_points.len(), 2 * (m - 2));
    }

    #[test]
    fn residue_sum_vanishes(n in 2usize..5, m in 3usize..7, seed in 0u64..1000) {
        let p = random_phase_point(n, m, seed).unwrap();
        let s = p.assemble().unwrap().residue_sum();
        let scale = p.eigenvalues.iter().flatten().map(|x| x.norm()).fold(1.0, f64::max);
        prop_assert!(s.iter().all(|x| x.norm() < 1e-10 * scale));
    }

    #[test]
    fn phase_point_json_round_trip(n in 2usize..4, m in 3usize..6, seed in 0u64..1000) {
        let p = random_phase_point(n, m, seed).unwrap();
        let q = PhasePoint::from_json(&p.to_json(), 1e-10).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn induced_bracket_is_kirillov_kostant(n in 2usize..4, seed in 0u64..1000) {
        let p = random_phase_point(n, 3, seed).unwrap();
        for j in 0..p.m() {
            let r = verify_induced_kk(&p.diagonalizers[j], &p.eigenvalues[j]).unwrap();
            prop_assert!(r.residual < 1e-12, "{}", r.residual);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn transform_round_trip(seed in 0u64..1000) {
        let p = random_phase_point(2, 4, seed).unwrap();
        let r = roundtrip(&p, None, 1e-12, 0.0).unwrap();
        prop_assert!(r.max_error() < 1e-6, "{}", r.max_error());
        prop_assert!(r.toric_offdiag < 1e-8);
    }
}
