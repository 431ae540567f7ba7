use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::model::equations_of_motion;
use crate::porbit::{seed_inner, seed_middle, seed_outer};

fn p() -> Params {
    Params::default()
}

fn outer_pair(e: f64, p: &Params) -> Vec<PeriodicOrbit> {
    let o = seed_outer(e, p).unwrap();
    let q = o.partner(p).unwrap();
    vec![o, q]
}

#[test]
fn inner_sphere_flux_is_the_action() {
    let p = p();
    let g = seed_inner(2.0, &p).unwrap();
    let ds = build_ds(std::slice::from_ref(&g), 2.0, &p).unwrap();
    assert_eq!(ds.topology, Topology::Sphere);
    assert!(!ds.admits_local_recrossings);
    let f = flux(&ds);
    assert!(f.agrees(), "{f:?}");
    assert!((f.action - g.action).abs() < 1e-12);
    // The twin surface in the other well carries the same flux.
    let twin = ds.rotated(&p).unwrap();
    let ft = flux(&twin);
    assert!((ft.action + f.action - 2.0 * g.action).abs() < 1e-8 && ft.agrees());
}

#[test]
fn outer_torus_flux_is_twice_the_action() {
    let p = p();
    let pair = outer_pair(2.0, &p);
    let ds = build_ds(&pair, 2.0, &p).unwrap();
    assert_eq!(ds.topology, Topology::Torus);
    let f = flux(&ds);
    assert!(f.agrees(), "{f:?}");
    assert!((f.action - 2.0 * pair[0].action).abs() < 1e-8);
}

#[test]
fn surface_points_lie_on_the_energy_shell() {
    let p = p();
    let g = seed_inner(2.0, &p).unwrap();
    let sphere = build_ds(std::slice::from_ref(&g), 2.0, &p).unwrap();
    let torus = build_ds(&outer_pair(2.0, &p), 2.0, &p).unwrap();
    for ds in [&sphere, &torus] {
        for k in (0..CURVE_NODES).step_by(37) {
            for j in 0..8 {
                let x = ds.point(k, j as f64 * 0.8);
                assert!((hamiltonian(&x, &p).unwrap() - 2.0).abs() <= 1e-10);
                assert!(ds.value(&x).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn generator_is_tangent_to_its_surface() {
    let p = p();
    let g = seed_inner(2.0, &p).unwrap();
    let ds = build_ds(std::slice::from_ref(&g), 2.0, &p).unwrap();
    let run = crate::integrate::Propagator::new(&p)
        .sampling(crate::integrate::Sampling::Uniform(g.period / 50.0))
        .run(&g.point, g.period)
        .unwrap();
    for (_, x) in &run.trajectory.samples {
        assert!(ds.value(x).abs() < 1e-7, "{}", ds.value(x));
        let v = equations_of_motion(x, &p).unwrap();
        assert!(ds.normal_rate(x, &v).abs() < 1e-5);
    }
}

#[test]
fn prototypical_crossings() {
    let p = p();
    let ds = build_ds(&outer_pair(2.0, &p), 2.0, &p).unwrap();
    let r0 = ds.curve.radius(0.0).0;
    let w = 2.0 - crate::model::potential_total(r0, 0.0, &p).unwrap();
    let out = PhaseState::new(r0, 0.0, (2.0 * p.m * w).sqrt(), 0.0);
    let v = equations_of_motion(&out, &p).unwrap();
    assert_eq!(classify_crossing(&ds, &out, &v), Crossing::Outward);
    let back = out.reversed();
    let v = equations_of_motion(&back, &p).unwrap();
    assert_eq!(classify_crossing(&ds, &back, &v), Crossing::Inward);
}

#[test]
fn stable_middle_orbit_is_flagged() {
    let p = p();
    let a = seed_middle(3.0, &p).unwrap();
    assert!(a.residue > 0.0);
    let pair = vec![a.clone(), a.partner(&p).unwrap()];
    let ds = build_ds(&pair, 3.0, &p).unwrap();
    assert!(ds.admits_local_recrossings);
    assert!(flux(&ds).admits_local_recrossings);
}

#[test]
fn wrong_generators_are_rejected() {
    let p = p();
    let g = seed_inner(2.0, &p).unwrap();
    assert!(matches!(build_ds(std::slice::from_ref(&g), 2.5, &p), Err(DsError::OffEnergy { .. })));
    let o = seed_outer(2.0, &p).unwrap();
    assert!(matches!(build_ds(&[o.clone(), o], 2.0, &p), Err(DsError::Generators(_))));
}

#[test]
fn surface_event_counts_crossings() {
    let p = p();
    let ds = Arc::new(build_ds(&outer_pair(2.0, &p), 2.0, &p).unwrap());
    let r0 = ds.curve.radius(0.0).0;
    let x = PhaseState::new(r0 - 0.5, 0.0, 0.0, 0.0);
    let w = 2.0 - crate::model::potential_total(x.r, 0.0, &p).unwrap();
    let x = PhaseState::new(x.r, 0.0, (2.0 * p.m * w).sqrt(), 0.0);
    let run = crate::integrate::Propagator::new(&p)
        .events(vec![ds.event(crate::integrate::Direction::Both), crate::integrate::EventSpec::radius(15.0, crate::integrate::Direction::Increasing).terminal()])
        .run(&x, 1000.0)
        .unwrap();
    assert_eq!(run.log.count_signed(0, 1), 1);
    assert_eq!(run.log.count_signed(0, -1), 0);
}

#[test]
fn chart_is_canonical_and_invertible() {
    let p = p();
    let g = seed_inner(2.0, &p).unwrap();
    let chart = inner_ds_chart(&g, &p).unwrap();
    assert!(chart.fit_residual <= CHART_FIT_TOL);
    assert!(chart.to_chart(&g.point)[0].abs() <= chart.fit_residual * 3.0);
    let omega = |a: &[f64; 4], b: &[f64; 4]| a[2] * b[0] - a[0] * b[2] + a[3] * b[1] - a[1] * b[3];
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
    use rand::Rng;
    for _ in 0..1000 {
        let x = PhaseState::new(rng.random_range(1.5..3.5), rng.random_range(-1.0..1.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let c = chart.to_chart(&x);
        assert_eq!(c[2], x.p_r);
        let y = chart.from_chart(&c);
        let err = (y.r - x.r).abs() + (y.theta - x.theta).abs() + (y.p_r - x.p_r).abs() + (y.p_theta - x.p_theta).abs();
        assert!(err < 1e-12);
        // Pullback of the symplectic form on random tangent pairs.
        let jac = |v: &[f64; 4]| -> [f64; 4] {
            let h = 1e-4;
            let xp = PhaseState::new(x.r + h * v[0], x.theta + h * v[1], x.p_r + h * v[2], x.p_theta + h * v[3]);
            let xm = PhaseState::new(x.r - h * v[0], x.theta - h * v[1], x.p_r - h * v[2], x.p_theta - h * v[3]);
            let (a, b) = (chart.to_chart(&xp), chart.to_chart(&xm));
            std::array::from_fn(|i| (a[i] - b[i]) / (2.0 * h))
        };
        let u: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        assert!((omega(&jac(&u), &jac(&v)) - omega(&u, &v)).abs() < 1e-10);
    }
}

#[test]
fn chart_outward_hemisphere() {
    let p = p();
    let g = seed_inner(2.0, &p).unwrap();
    let chart = inner_ds_chart(&g, &p).unwrap();
    let x = chart.outward_point(0.1, 0.5, &p).unwrap();
    assert!((hamiltonian(&x, &p).unwrap() - 2.0).abs() < 1e-10);
    let c = chart.to_chart(&x);
    assert!(c[0].abs() < 1e-14);
    let f = equations_of_motion(&x, &p).unwrap();
    let (_, drb) = chart.rbar(x.theta);
    assert!(f[0] - drb * f[1] > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn reversal_flips_orientation(k in 0usize..CURVE_NODES, phi in 0.0f64..std::f64::consts::TAU) {
        let p = p();
        let ds = cached_sphere();
        let x = ds.point(k, phi);
        let v = equations_of_motion(&x, &p).unwrap();
        let a = classify_crossing(&ds, &x, &v);
        let y = x.reversed();
        let w = equations_of_motion(&y, &p).unwrap();
        let b = classify_crossing(&ds, &y, &w);
        let expect = match a { Crossing::Outward => Crossing::Inward, Crossing::Inward => Crossing::Outward, Crossing::Tangent => Crossing::Tangent };
        prop_assert_eq!(b, expect);
    }
}

fn cached_sphere() -> Arc<DividingSurface> {
    static DS: std::sync::OnceLock<Arc<DividingSurface>> = std::sync::OnceLock::new();
    DS.get_or_init(|| {
        let p = p();
        let g = seed_inner(2.0, &p).unwrap();
        Arc::new(build_ds(std::slice::from_ref(&g), 2.0, &p).unwrap())
    })
    .clone()
}
