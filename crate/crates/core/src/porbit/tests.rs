use super::*;
use crate::integrate::{symplectic_defect, det4, Sampling};
use crate::model::{equations_of_motion, PhaseState};

fn p() -> Params {
    Params::default()
}

fn diag(l: f64) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    m[0][0] = 1.0;
    m[1][1] = 1.0;
    m[2][2] = l;
    m[3][3] = 1.0 / l;
    m
}

#[test]
fn residue_of_simple_matrices() {
    assert_eq!(greene_residue(&diag(1.0)), 0.0);
    let r = greene_residue(&diag(2.0));
    assert!((r + 0.125).abs() < 1e-15);
    assert_eq!(Stability::from_residue(r), Stability::Hyperbolic);
    let r = greene_residue(&diag(-2.0));
    assert!((r - 1.125).abs() < 1e-15);
    assert_eq!(Stability::from_residue(r), Stability::InverseHyperbolic);
    assert_eq!(Stability::from_residue(0.5), Stability::Elliptic);
}

#[test]
fn inner_brake_orbit_at_e2() {
    let p = p();
    let o = seed_inner(2.0, &p).unwrap();
    assert_eq!(o.kind, OrbitKind::Brake);
    assert_eq!(o.family.label(), "i+");
    assert!(o.closure < 1e-8, "{}", o.closure);
    assert!((o.point.r - 2.40424).abs() < 1e-4, "{}", o.point.r);
    assert_eq!(o.stability, Stability::Hyperbolic);
    // Both turning points have p = 0.
    let run = crate::integrate::Propagator::new(&p).tolerances(shot_tolerances()).run(&o.point, 0.25 * o.period).unwrap();
    let t = run.trajectory.final_state;
    assert!(t.p_r.abs() < 1e-8 && t.p_theta.abs() < 1e-8, "{t:?}");
}

#[test]
fn outer_orbit_from_relative_equilibrium() {
    let p = p();
    let o = seed_outer(2.0, &p).unwrap();
    assert_eq!(o.kind, OrbitKind::Rotating);
    assert!(o.point.p_theta > 0.0);
    assert!(o.closure < 1e-8);
    assert!(o.point.r > 6.0 && o.point.r < 8.0, "{}", o.point.r);
    assert!(o.action > 0.0);
}

#[test]
fn refine_is_idempotent() {
    let p = p();
    let o = seed_outer(2.0, &p).unwrap();
    let again = refine_orbit(&o.point, 2.0, o.section, &p).unwrap();
    assert!((again.point.r - o.point.r).abs() < 1e-12);
    assert!((again.period - o.period).abs() < 1e-10 * o.period);
}

#[test]
fn monodromy_structure() {
    let p = p();
    for o in [seed_outer(2.0, &p).unwrap(), seed_inner(2.0, &p).unwrap()] {
        let m = monodromy(&o, &p).unwrap();
        assert!((det4(&m) - 1.0).abs() < 1e-6);
        assert!(symplectic_defect(&m) < 1e-6 * (1.0 + o.residue.abs()));
        let mat = nalgebra::Matrix4::from_fn(|i, k| m[i][k]);
        let mut ev: Vec<_> = mat.complex_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| (a - 1.0).norm().total_cmp(&(b - 1.0).norm()));
        // The trivial pair is a Jordan block, so each eigenvalue is only good to sqrt(eps · |M|).
        let trivial = ((ev[0] - 1.0).norm()).max((ev[1] - 1.0).norm());
        let scale = mat.amax().max(1.0);
        assert!(trivial < 1e-5 * scale.sqrt(), "{trivial}");
        let prod = ev[2] * ev[3];
        assert!((prod.re - 1.0).abs() < 1e-6 * scale && prod.im.abs() < 1e-6 * scale, "{prod}");
        assert!((greene_residue(&m) - o.residue).abs() < 1e-8 * (1.0 + o.residue.abs()));
    }
}

#[test]
fn reflected_partner_matches() {
    let p = p();
    for o in [seed_outer(2.0, &p).unwrap(), seed_middle(2.0, &p).unwrap(), seed_inner(2.0, &p).unwrap()] {
        let q = o.partner(&p).unwrap();
        assert_eq!(q.family.sign, Sign::Minus);
        assert!(q.closure < 1e-8);
        let refined = refine_orbit(&q.point, o.energy, o.section, &p);
        if o.kind == OrbitKind::Rotating {
            let refined = refined.unwrap();
            assert!(refined.point.p_theta < 0.0);
            assert!((refined.period - o.period).abs() < 1e-8);
            assert!((refined.action - o.action).abs() < 1e-8);
            assert!((refined.residue - o.residue).abs() < 1e-8 * (1.0 + o.residue.abs()));
        }
        assert!((q.action - o.action).abs() < 1e-8);
        assert!((q.residue - o.residue).abs() < 1e-8 * (1.0 + o.residue.abs()));
    }
}

/// Simpson rule on `p · q̇` from dense samples over half of a brake orbit, doubled.
#[test]
fn brake_action_is_twice_the_half_loop() {
    let p = p();
    let o = seed_inner(2.0, &p).unwrap();
    let n = 4000;
    let h = 0.5 * o.period / n as f64;
    let run = crate::integrate::Propagator::new(&p)
        .tolerances(shot_tolerances())
        .sampling(Sampling::Uniform(h))
        .run(&o.point, 0.5 * o.period)
        .unwrap();
    let f: Vec<f64> = run
        .trajectory
        .samples
        .iter()
        .take(n + 1)
        .map(|(_, s)| {
            let d = equations_of_motion(s, &p).unwrap();
            s.p_r * d[0] + s.p_theta * d[1]
        })
        .collect();
    assert_eq!(f.len(), n + 1);
    let simpson: f64 = (0..n / 2).map(|k| h / 3.0 * (f[2 * k] + 4.0 * f[2 * k + 1] + f[2 * k + 2])).sum();
    let s = action(&o, &p).unwrap();
    assert!((2.0 * simpson - s).abs() < 1e-6 * s, "{} vs {s}", 2.0 * simpson);
    assert!((s - o.action).abs() < 1e-9 * s);
}

#[test]
fn inner_family_folds_below_zero() {
    let p = p();
    let start = refine_orbit(&PhaseState::new(2.6, 0.0, 0.0, 1.0), 0.0, Section::Brake, &p).unwrap().with_family(FamilyTag::new(FamilyKind::Inner, Sign::Plus));
    let ctl = StepControl { max_steps: 400, ..StepControl::default() };
    let fam = continue_family(&start, (-1.0, 0.3), &ctl, &p).unwrap();
    let folds: Vec<_> = fam.bifurcations.iter().filter(|b| b.kind == BifurcationKind::SaddleCentre).collect();
    assert_eq!(folds.len(), 1, "{:?}", fam.bifurcations);
    assert!((folds[0].energy + 0.29).abs() < 0.02, "{}", folds[0].energy);
    assert!(!folds[0].wide);
    assert!(fam.orbits.iter().all(|o| o.closure < 1e-8 && o.action > 0.0 && o.family == start.family));
    assert!(fam.nodes.windows(2).all(|w| w[1].s > w[0].s));
    // Fold: both branches sit above the fold energy.
    let e_min = fam.energies().fold(f64::INFINITY, f64::min);
    assert!(e_min > folds[0].energy - 1e-3 && e_min < folds[0].energy + 1e-2);
}

#[test]
fn csv_has_one_row_per_orbit() {
    let p = p();
    let o = seed_outer(2.0, &p).unwrap();
    let fam = Family { tag: o.family, orbits: vec![o.clone(), o], nodes: Vec::new(), bifurcations: Vec::new(), stall: None };
    let mut buf = Vec::new();
    write_family_csv(&[fam], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], FAMILY_CSV_HEADER.join(","));
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("o+,2.0000000000,"));
    assert!(lines[1].ends_with(",hyperbolic"));
}
