use std::f64::consts::SQRT_2;

use bwp_core::averaging::{averaged_drift, melnikov, periodic_orbit};
use bwp_core::integrals::{conservation_drift, integrals, planar_reduce, scale_pair, REV_THETA_MAX};
use bwp_core::integrate::{integrate, Tolerances};
use bwp_core::oscillators::network_from_params;
use bwp_core::systems::{make_family, FamilyId, FamilySpec, Params, VectorField};
use proptest::prelude::*;

fn fam(id: FamilyId, kv: &[(&str, f64)]) -> FamilySpec {
    make_family(id, &Params::from_pairs(kv)).unwrap()
}

fn field(spec: &FamilySpec, s: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; s.len()];
    spec.eval_into(s, &mut out);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rev_tb_field_is_r_reversible(y in -2.0..2.0f64, v in -2.0..2.0f64, w in -2.0..2.0f64, a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let spec = fam(FamilyId::RevTb25, &[("a", a), ("b", b)]);
        let f = field(&spec, &[y, v, w]);
        let g = field(&spec, &[-y, v, -w]);
        // field(R s) = −R field(s)
        prop_assert!((g[0] - f[0]).abs() < 1e-14);
        prop_assert!((g[1] + f[1]).abs() < 1e-14);
        prop_assert!((g[2] - f[2]).abs() < 1e-12 * (1.0 + f[2].abs()));
    }

    #[test]
    fn second_reversibility_only_in_kolmogorov_case(y in 0.1..2.0f64, v in 0.1..2.0f64, w in 0.1..2.0f64, a in 0.1..2.0f64) {
        let r2 = |spec: &FamilySpec| {
            let f = field(spec, &[y, v, w]);
            let g = field(spec, &[y, -v, w]);
            (g[2] + f[2]).abs()
        };
        prop_assert!(r2(&fam(FamilyId::RevTb25, &[("a", 0.0), ("b", 0.0)])) < 1e-12);
        // a·y·w > 0 on this box, so the defect is 2·a·y·w
        let d = r2(&fam(FamilyId::RevTb25, &[("a", a), ("b", 0.0)]));
        prop_assert!((d - 2.0 * a * y * w).abs() < 1e-12 * (1.0 + d));
    }

    #[test]
    fn heteroclinic_melnikov_is_linear_in_coefficients(a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let m = melnikov(&fam(FamilyId::RevTb25, &[("a", a), ("b", b)]), 0.0).unwrap();
        prop_assert!((m.m_theta - 2.0 * SQRT_2 / 3.0 * (b - a)).abs() < 1e-12 * (1.0 + a.abs() + b.abs()));
        prop_assert!(m.m_h.abs() < 1e-12);
    }

    #[test]
    fn scaled_coordinates_invert(theta in 1e-3..50.0f64, h in -10.0..10.0f64) {
        let c = scale_pair(bwp_core::integrals::IntegralPair { theta, hamiltonian: h }).unwrap();
        prop_assert!((c.tau.exp() - theta).abs() < 1e-12 * theta);
        prop_assert!((c.h_tilde * theta.powf(1.5) - h).abs() < 1e-12 * (1.0 + h.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn unperturbed_orbits_conserve_both_integrals(theta in 0.05..2.0f64, frac in 0.05..0.95f64, rev in any::<bool>()) {
        let (spec, theta) = if rev {
            (fam(FamilyId::RevTb25, &[("a", 0.0), ("b", 0.0)]), (theta / 2.0 - 0.5) * REV_THETA_MAX)
        } else {
            (fam(FamilyId::Tb24, &[("eps", 0.0), ("lambda", 1.0), ("b", -1.2)]), theta)
        };
        let ps = planar_reduce(spec.id(), theta).unwrap();
        let w = ps.periodic_window().unwrap();
        let h = w.h_center + frac * (w.h_separatrix - w.h_center);
        let orb = periodic_orbit(&ps, h).unwrap();
        let s0 = ps.embed(orb.y_max, 0.0);
        let p = integrals(spec.id(), &s0).unwrap();
        prop_assert!((p.theta - theta).abs() < 1e-12 && (p.hamiltonian - h).abs() < 1e-12);
        let tr = integrate(&spec, &s0, (0.0, 20.0), &Tolerances::new(1e-12, 1e-14)).unwrap();
        let (dt, dh) = conservation_drift(&tr, spec.id()).unwrap();
        prop_assert!(dt < 1e-9 && dh < 1e-9);
        // and the periodic orbit closes after one period
        let back = tr.at(orb.period).unwrap();
        prop_assert!(back.iter().zip(&s0).all(|(a, b)| (a - b).abs() < 1e-7), "{back:?} vs {s0:?}");
    }

    #[test]
    fn drift_is_affine_in_lambda_and_b(lambda in -2.0..2.0f64, b in -2.0..2.0f64, theta in 0.2..2.0f64, frac in 0.1..0.9f64) {
        let ps = planar_reduce(FamilyId::Tb24, theta).unwrap();
        let w = ps.periodic_window().unwrap();
        let h = w.h_center + frac * (w.h_separatrix - w.h_center);
        let d = |l: f64, bb: f64| averaged_drift(&fam(FamilyId::Tb24, &[("eps", 0.1), ("lambda", l), ("b", bb)]), theta, h).unwrap();
        let (d00, d10, d01, dx) = (d(0.0, 0.0), d(1.0, 0.0), d(0.0, 1.0), d(lambda, b));
        let pred_t = d00.delta_theta + lambda * (d10.delta_theta - d00.delta_theta) + b * (d01.delta_theta - d00.delta_theta);
        let pred_h = d00.delta_h + lambda * (d10.delta_h - d00.delta_h) + b * (d01.delta_h - d00.delta_h);
        prop_assert!((dx.delta_theta - pred_t).abs() < 1e-9 * (1.0 + pred_t.abs()));
        prop_assert!((dx.delta_h - pred_h).abs() < 1e-9 * (1.0 + pred_h.abs()));
    }

    #[test]
    fn antipode_space_is_invariant(u in proptest::collection::vec(-1.5..1.5f64, 4), node in 0..2usize) {
        let net = network_from_params(&Params::from_pairs(&[("m", 1.0), ("node", node as f64)])).unwrap();
        let g = *net.graph();
        let mut x0 = vec![0.0; net.state_dim()];
        for j in 1..=2i64 {
            for c in 0..2 {
                let v = u[2 * (j as usize - 1) + c];
                x0[g.index(j) * 2 + c] = v;
                x0[g.index(-j) * 2 + c] = -v;
            }
        }
        let tr = integrate(&net, &x0, (0.0, 20.0), &Tolerances::new(1e-10, 1e-12)).unwrap();
        prop_assert!(tr.states.iter().all(|s| net.antipode_residual(s) <= 1e-9));
    }
}
