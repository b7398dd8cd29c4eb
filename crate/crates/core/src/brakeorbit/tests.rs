use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use super::*;
use crate::linalg::{eye, max_abs, Mat};

fn ell(r: &[f64]) -> (EllipsoidSpec, HamiltonianSpec) {
    let e = EllipsoidSpec::new(r.to_vec()).unwrap();
    let h = ellipsoid_hamiltonian(&e).unwrap();
    (e, h)
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

/// `H_Σ + c·Σ x_i⁴`, even, reversible and convex.
fn quartic_perturbation(e: &EllipsoidSpec, c: f64) -> HamiltonianSpec {
    let base = ellipsoid_hamiltonian(e).unwrap();
    let (b1, b2, b3) = (base.clone(), base.clone(), base.clone());
    let eval = Evaluators {
        h: Arc::new(move |x: &Vector| b1.h(x) + c * x.iter().map(|v| v.powi(4)).sum::<f64>()),
        grad: Arc::new(move |x: &Vector| b2.grad(x) + x.map(|v| 4.0 * c * v.powi(3))),
        hess: Arc::new(move |x: &Vector| b3.hess(x) + Mat::from_diagonal(&x.map(|v| 12.0 * c * v * v))),
    };
    let flags = HamiltonianFlags { reversible: true, even: true, convex: true };
    HamiltonianSpec::new(e.n(), 1.0, eval, flags, 1.5, 0.05).unwrap()
}

#[test]
fn gauge_values() {
    let (_, h) = ell(&[1.0, SQRT_2]);
    assert_eq!(h.h(&v(&[0.0, 0.0, 1.0, 0.0])), 1.0);
    assert!(homogeneity_defect(&h, 32) < 1e-14);
    let (_, s) = ell(&[1.0, 1.0]);
    let x = v(&[0.3, -0.2, 0.7, 0.1]);
    assert!((s.h(&x) - x.norm_squared()).abs() < 1e-15);
    assert!((h.diameter() - 2.0 * SQRT_2).abs() < 1e-9);
}

#[test]
fn ray_gauge_matches_closed_form() {
    let e = EllipsoidSpec::new(vec![1.0, 1.7]).unwrap();
    let closed = ellipsoid_hamiltonian(&e).unwrap();
    let ray = gauge_hamiltonian(&ConvexBody::ellipsoid(&e)).unwrap();
    assert!(ray.flags().reversible && ray.flags().even && ray.flags().convex);
    assert!(homogeneity_defect(&ray, 16) < 1e-12);
    for x in [v(&[0.3, -0.5, 0.8, 0.1]), v(&[-1.0, 0.2, 0.1, 1.2])] {
        assert!((ray.h(&x) - closed.h(&x)).abs() < 1e-13 * closed.h(&x));
        assert!((ray.grad(&x) - closed.grad(&x)).norm() < 1e-12);
        assert!(max_abs(&(ray.hess(&x) - closed.hess(&x))) < 1e-7);
    }
    assert_eq!(ray.tangent_curvature_failures(16).unwrap(), 0);
}

#[test]
fn non_convex_body_rejected() {
    // a star-shaped "plus" body: F = min over two elongated ellipses
    let body = ConvexBody {
        dim: 2,
        f: Arc::new(|x: &Vector| (x[0] * x[0] / 4.0 + x[1] * x[1] * 4.0).min(x[0] * x[0] * 4.0 + x[1] * x[1] / 4.0)),
        grad_f: Arc::new(|x: &Vector| {
            if x[0] * x[0] / 4.0 + x[1] * x[1] * 4.0 <= x[0] * x[0] * 4.0 + x[1] * x[1] / 4.0 {
                v(&[x[0] / 2.0, 8.0 * x[1]])
            } else {
                v(&[8.0 * x[0], x[1] / 2.0])
            }
        }),
    };
    assert!(matches!(gauge_hamiltonian(&body), Err(crate::Error::Convexity(_))));
}

#[test]
fn irrationality_flags() {
    let e = EllipsoidSpec::new(vec![1.0, SQRT_2]).unwrap();
    assert!(e.ratios_irrational());
    assert!(!e.squared_ratios_irrational());
    let e = EllipsoidSpec::new(vec![1.0, 2f64.powf(0.25), 3f64.powf(0.25)]).unwrap();
    assert!(e.ratios_irrational() && e.squared_ratios_irrational());
    assert!(!looks_irrational(0.75) && looks_irrational(PI));
    assert!(EllipsoidSpec::new(vec![1.0, -1.0]).is_err());
}

#[test]
fn declared_flags_are_checked() {
    let eval = Evaluators {
        h: Arc::new(|x: &Vector| x.norm_squared() + x[0]),
        grad: Arc::new(|x: &Vector| {
            let mut g = x * 2.0;
            g[0] += 1.0;
            g
        }),
        hess: Arc::new(|x: &Vector| eye(x.len()) * 2.0),
    };
    let flags = HamiltonianFlags { reversible: true, even: false, convex: true };
    assert!(matches!(HamiltonianSpec::new(1, 1.0, eval, flags, 1.0, 0.0), Err(crate::Error::Hypothesis(_))));
    let bad = Evaluators {
        h: Arc::new(|x: &Vector| x.norm_squared()),
        grad: Arc::new(|x: &Vector| x * 3.0),
        hess: Arc::new(|x: &Vector| eye(x.len()) * 2.0),
    };
    assert!(matches!(HamiltonianSpec::new(1, 1.0, bad, HamiltonianFlags::default(), 1.0, 0.0), Err(crate::Error::Domain(_))));
}

#[test]
fn mechanical_lift_and_linear_brake_orbits() {
    let pot = Potential::quadratic(Mat::from_diagonal(&v(&[1.0, 4.0]))).unwrap();
    let (h, pf) = mechanical_lift(&pot, 1.0).unwrap();
    assert!(pf.even && pf.zero_at_origin);
    assert!(h.flags().reversible && h.flags().even && h.flags().convex);
    let x = v(&[0.3, -0.4, 0.5, 0.2]);
    assert!((h.h(&x) - (0.5 * 0.25 + 0.5 * (0.25 + 4.0 * 0.04))).abs() < 1e-15);
    // plane 2: q₂(t) = a cos 2t with ½·4a² = 1, half period π/2
    let cfg = ShootConfig::default();
    let rep = shoot_brake_orbit(&h, &v(&[0.02, 0.7]), 1.5, &cfg).unwrap();
    assert_eq!(rep.status, ShootStatus::Converged, "{rep:?}");
    let o = rep.orbit.unwrap();
    assert!((o.half_period - PI / 2.0).abs() < 1e-9);
    let a = 1.0 / SQRT_2;
    for (t, x) in o.trajectory.times.iter().zip(&o.trajectory.states) {
        assert!((x[3].abs() - a * (2.0 * t).cos().abs()).abs() < 1e-8);
        assert!(x[2].abs() < 1e-8);
    }
    assert!(o.brake_defect < 1e-8 && o.energy_defect < 1e-9);
}

#[test]
fn grid_potential_interpolates() {
    let f = |q: &[f64]| 0.5 * (q[0] * q[0] + 4.0 * q[1] * q[1]) + 0.1 * q[0].powi(4);
    let g = GridPotential::sample(vec![-2.0, -2.0], vec![0.05, 0.05], vec![81, 81], f).unwrap();
    assert_eq!(g.domain(), 2.0);
    for q in [[0.31, -0.17], [1.234, 0.5], [-0.9, 1.1]] {
        let (val, grad, hess) = g.eval(&q);
        assert!((val - f(&q)).abs() < 1e-6, "{val} vs {}", f(&q));
        assert!((grad[0] - (q[0] + 0.4 * q[0].powi(3))).abs() < 1e-4);
        assert!((grad[1] - 4.0 * q[1]).abs() < 1e-4);
        assert!((hess[(0, 0)] - (1.0 + 1.2 * q[0] * q[0])).abs() < 1e-2);
        assert!((hess[(1, 1)] - 4.0).abs() < 1e-2 && hess[(0, 1)].abs() < 1e-2);
    }
    assert!(g.eval(&[2.5, 0.0]).0.is_nan());
    let (h, pf) = mechanical_lift(&g.into_potential(), 0.5).unwrap();
    assert!(pf.even && h.flags().reversible);
}

#[test]
fn flow_matches_linear_closed_form() {
    let (_, h) = ell(&[1.0, SQRT_2]);
    let cfg = FlowConfig::default();
    let tr = flow_with_monodromy(&h, &v(&[0.0, 0.0, 1.0, 0.0]), PI, 64, &cfg).unwrap();
    for (t, x) in tr.times.iter().zip(&tr.states) {
        assert!((x[0] + (2.0 * t).sin()).abs() < 1e-10 && (x[2] - (2.0 * t).cos()).abs() < 1e-10);
    }
    assert!(tr.energy_drift <= 1e-10 && tr.symplectic_drift <= 1e-8);
    let (_, sphere) = ell(&[1.0, 1.0]);
    let tr = flow_with_monodromy(&sphere, &v(&[0.0, 0.0, 0.6, 0.8]), PI, 4, &cfg).unwrap();
    assert!(max_abs(&(tr.end_monodromy().unwrap() - eye(4))) < 1e-9);
    let back = flow_states(&sphere, &v(&[0.0, 0.0, 0.6, 0.8]), -PI / 2.0, 4, &cfg).unwrap();
    assert!((back.end_state() - v(&[0.0, 0.0, -0.6, -0.8])).norm() < 1e-10);
}

#[test]
fn quartic_energy_conservation_and_midpoint_check() {
    let e = EllipsoidSpec::new(vec![1.0, 1.3]).unwrap();
    let h = quartic_perturbation(&e, 0.05);
    let x0 = h.lift_q(&h.project_q(&v(&[0.6, 0.5])).unwrap());
    let tr = flow_with_monodromy(&h, &x0, 6.0, 50, &FlowConfig::default()).unwrap();
    assert!(tr.energy_drift <= 1e-10 && tr.symplectic_drift <= 1e-8, "{} {}", tr.energy_drift, tr.symplectic_drift);
    let mid = flow_midpoint(&h, &x0, 6.0, 6000).unwrap();
    let end = Vector::from_vec(mid.final_state.clone());
    assert!((end - tr.end_state()).norm() < 1e-4);
    assert!(mid.energy_drift < 1e-6);
}

#[test]
fn tight_energy_tolerance_is_reported() {
    let e = EllipsoidSpec::new(vec![1.0, 1.3]).unwrap();
    let h = quartic_perturbation(&e, 0.05);
    let x0 = h.lift_q(&h.project_q(&v(&[0.6, 0.5])).unwrap());
    let cfg = FlowConfig { energy_tol: 1e-16, max_steps: 500, ..FlowConfig::default() };
    let r = flow_states(&h, &x0, 3.0, 5, &cfg);
    assert!(matches!(r, Err(crate::Error::StepSize { .. })), "{:?}", r.map(|t| (t.energy_drift, t.accepted, t.rejected)));
}

#[test]
fn shooting_on_the_ellipsoid() {
    let (_, h) = ell(&[1.0, SQRT_2]);
    let cfg = ShootConfig::default();
    let rep = shoot_brake_orbit(&h, &v(&[1.0, 0.05]), 1.65, &cfg).unwrap();
    assert_eq!(rep.status, ShootStatus::Converged, "{rep:?}");
    assert!(rep.residual <= 1e-10);
    let o = rep.orbit.unwrap();
    assert!((o.tau - PI).abs() < 1e-8 * PI);
    assert!(o.symmetric && o.symmetry_defect < 1e-8);
    // plane 2 is resonant with plane 1 (periods π and 2π): the orbit sits in a family
    let rep = shoot_brake_orbit(&h, &v(&[0.03, 1.4]), 3.0, &cfg).unwrap();
    assert_eq!(rep.status, ShootStatus::Degenerate, "{rep:?}");
    let o = rep.orbit.unwrap();
    assert!((o.tau - 2.0 * PI).abs() < 1e-8 * 2.0 * PI);
}

#[test]
fn sphere_reports_degenerate_direction() {
    let (_, h) = ell(&[1.0, 1.0]);
    let rep = shoot_brake_orbit(&h, &v(&[0.9, 0.3]), 1.5, &ShootConfig::default()).unwrap();
    assert_eq!(rep.status, ShootStatus::Degenerate);
    assert_eq!(rep.degenerate_directions.len(), 1);
    assert!((rep.half_period - PI / 2.0).abs() < 1e-9);
}

#[test]
fn iterates_are_reduced() {
    let (_, h) = ell(&[1.0, 2f64.powf(0.25), 3f64.powf(0.25)]);
    // a guess near twice the plane-1 half period
    let rep = shoot_brake_orbit(&h, &v(&[1.0, 0.01, 0.01]), 3.1, &ShootConfig::default()).unwrap();
    assert_eq!(rep.status, ShootStatus::Converged, "{rep:?}");
    assert_eq!(rep.iterate_of, 2);
    assert!((rep.half_period - PI / 2.0).abs() < 1e-9);
}

#[test]
fn analytic_orbits_and_classification() {
    let (e, h) = ell(&[1.0, SQRT_2]);
    let orbits = ellipsoid_analytic_orbits(&e, &h, 400, 1e-6).unwrap();
    let periods: Vec<f64> = orbits.iter().map(|o| o.tau).collect();
    assert!((periods[0] - PI).abs() < 1e-15 && (periods[1] - 2.0 * PI).abs() < 1e-14);
    for o in &orbits {
        assert!(o.residual <= 1e-12, "{}", o.residual);
        assert!(o.symmetric && o.symmetry_defect < 1e-12 && o.brake_defect < 1e-12);
        assert!(classify_orbit(o).symmetric);
    }
    assert!(!orbits[0].equivalent(&orbits[1]));
    assert!(orbits[0].equivalent(&orbits[0].clone()));
    // the same orbit started a third of a period later
    let o = &orbits[1];
    let cfg = FlowConfig::default();
    let start = flow_states(&h, &o.x0, o.tau / 3.0, 1, &cfg).unwrap().end_state().clone();
    let full = flow_states(&h, &start, o.tau, 800, &cfg).unwrap();
    let vel: Vec<Vector> = full.states.iter().map(|x| h.vector_field(x)).collect();
    let shifted = OrbitTrace::from_periodic(&full.states, &vel, o.tau / 800.0, true);
    assert!(o.trace.hausdorff(&shifted) < o.geom_tol, "{}", o.trace.hausdorff(&shifted));
}

#[test]
fn index_reports() {
    let (e, h) = ell(&[1.0, SQRT_2]);
    let orbits = ellipsoid_analytic_orbits(&e, &h, 200, 1e-6).unwrap();
    let cfg = FlowConfig::default();
    let r1 = orbit_index_report(&orbits[0], &h, 0, &cfg).unwrap();
    let p = orbits[0].trajectory.end_monodromy().unwrap();
    let model = crate::sympcore::diamond(&crate::linalg::rotation(PI), &crate::linalg::rotation(PI / 2.0));
    assert!(max_abs(&(p - model)) < 1e-12);
    assert_eq!(r1.l0.nullity, 1);
    assert!(r1.nondegenerate && r1.decomposition.pass);
    // plane 2: both B blocks vanish at T = π
    let r2 = orbit_index_report(&orbits[1], &h, 0, &cfg).unwrap();
    assert_eq!(r2.l0.nullity, 2);
    assert!(!r2.nondegenerate && r2.decomposition.pass);
    let (se, sh) = ell(&[1.0, 1.0]);
    let so = ellipsoid_analytic_orbits(&se, &sh, 100, 1e-6).unwrap();
    let rs = orbit_index_report(&so[0], &sh, 0, &cfg).unwrap();
    assert_eq!(rs.l0.nullity, 2);
    assert!(!rs.nondegenerate);
}

#[test]
fn integrated_and_exact_paths_agree() {
    let e = EllipsoidSpec::new(vec![1.0, 1.3]).unwrap();
    let h = quartic_perturbation(&e, 0.0);
    let exact = ellipsoid_hamiltonian(&e).unwrap();
    let cfg = ShootConfig { samples: 64, ..ShootConfig::default() };
    let rep = shoot_brake_orbit(&h, &v(&[1.0, 0.02]), 1.5, &cfg).unwrap();
    let o = rep.orbit.unwrap();
    let a = orbit_index_report(&o, &h, 0, &cfg.flow).unwrap();
    let b = orbit_index_report(&o, &exact, 0, &cfg.flow).unwrap();
    assert_eq!((a.l0, a.l1, a.square), (b.l0, b.l1, b.square));
    let path = fundamental_path(&h, &o.trajectory, &cfg.flow).unwrap();
    let mid = path.at(0.37 * o.half_period).unwrap();
    let ex = fundamental_path(&exact, &o.trajectory, &cfg.flow).unwrap().at(0.37 * o.half_period).unwrap();
    assert!(max_abs(&(mid - ex)) < 1e-9);
}

#[test]
fn multistart_on_irrational_ellipsoid() {
    let (e, h) = ell(&[1.0, 2f64.powf(0.25), 3f64.powf(0.25)]);
    let t_max = 1.1 * e.periods().iter().fold(0.0f64, |a, &b| a.max(b)) / 2.0;
    let cfg = ShootConfig { samples: 200, ..ShootConfig::default() };
    let out = multiplicity_audit(&h, &SearchBudget::new(12, t_max), &cfg).unwrap();
    let r = &out.report;
    assert_eq!(r.distinct, 3, "{r:?}");
    assert_eq!(r.status, AuditStatus::BoundReached);
    assert_eq!(r.symmetric, 3);
    let mut taus: Vec<f64> = r.orbits.iter().map(|o| o.tau).collect();
    taus.sort_by(f64::total_cmp);
    for (t, p) in taus.iter().zip(e.periods()) {
        assert!((t - p).abs() < 1e-8 * p);
    }
    assert!(r.orbits.iter().all(|o| o.nu_l0 == Some(1)));
}

#[test]
fn multistart_on_perturbed_ellipsoid() {
    let e = EllipsoidSpec::new(vec![1.0, 1.25]).unwrap();
    let h = quartic_perturbation(&e, 0.01);
    let cfg = ShootConfig { samples: 200, ..ShootConfig::default() };
    let out = multiplicity_audit(&h, &SearchBudget::new(10, 3.0), &cfg).unwrap();
    assert!(out.report.distinct >= multiplicity_bound(2), "{:?}", out.report);
    // shuffled input order gives the same report
    let starts = multistart_guesses(&h, &SearchBudget::new(10, 3.0), &cfg.flow).unwrap();
    let mut shots: Vec<_> = starts.iter().rev().map(|s| shoot_brake_orbit(&h, &Vector::from_vec(s.q.clone()), s.t, &cfg)).collect();
    shots.rotate_left(3);
    assert_eq!(merge_shots(2, shots).report, out.report);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn perturbed_shots_return(r2 in 1.15f64..1.95, dir in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let ratio = r2 * r2;
            // stay away from low-order resonances between the two planes
            prop_assume!((1..=4).all(|q| (1..=8).all(|p| (ratio - p as f64 / q as f64).abs() > 0.03)));
            let (e, h) = ell(&[1.0, r2]);
            let orbits = ellipsoid_analytic_orbits(&e, &h, 200, 1e-6).unwrap();
            let cfg = ShootConfig { samples: 200, ..ShootConfig::default() };
            let d = v(&dir);
            prop_assume!(d.norm() > 0.1);
            let d = &d * (1e-2 / d.norm());
            for o in &orbits {
                let q = o.x0.rows(2, 2).into_owned() + d.rows(0, 2);
                let rep = shoot_brake_orbit(&h, &q, o.half_period + d[2], &cfg).unwrap();
                prop_assert_eq!(rep.status, ShootStatus::Converged);
                prop_assert!(rep.iterations <= 20 && rep.residual <= 1e-10);
                prop_assert!(rep.orbit.unwrap().distance(o) <= 1e-6);
            }
        }
    }
}
