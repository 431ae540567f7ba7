use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use proptest::prelude::*;

use super::*;
use crate::integrate::{Propagator, Tolerances};
use crate::model::hamiltonian;
use crate::porbit::shot_tolerances;

fn p() -> Params {
    Params::default()
}

fn surfaces(e: f64) -> &'static Surfaces {
    static E1: OnceLock<Surfaces> = OnceLock::new();
    static E2: OnceLock<Surfaces> = OnceLock::new();
    static E5: OnceLock<Surfaces> = OnceLock::new();
    let cell = match e {
        1.0 => &E1,
        2.0 => &E2,
        5.0 => &E5,
        _ => unreachable!(),
    };
    cell.get_or_init(|| Surfaces::build(e, &p()).unwrap())
}

fn on_shell(r: f64, theta: f64, p_r: f64, e: f64, p: &Params) -> PhaseState<f64> {
    let pt = crate::porbit::p_theta_on_shell(r, theta, p_r, e, 1.0, p).unwrap();
    PhaseState::new(r, theta, p_r, pt)
}

#[test]
fn regions_at_e2() {
    let p = p();
    let s = surfaces(2.0);
    assert_eq!(region_of(&on_shell(1.1, 0.0, 0.0, 2.0, &p), s, &p).unwrap(), Region::B1Plus);
    assert_eq!(region_of(&on_shell(1.1, PI, 0.0, 2.0, &p), s, &p).unwrap(), Region::B1Minus);
    assert_eq!(region_of(&on_shell(15.0, 0.3, 0.0, 2.0, &p), s, &p).unwrap(), Region::B3);
    let ri = s.inner_plus.curve.radius(0.0).0;
    let ro = s.outer.as_ref().unwrap().curve.radius(0.0).0;
    assert_eq!(region_of(&on_shell(0.5 * (ri + ro), 0.0, 0.0, 2.0, &p), s, &p).unwrap(), Region::B2);
    // On the outer surface the flow direction decides.
    let out = on_shell(ro, 0.0, 0.5, 2.0, &p);
    let inw = PhaseState::new(ro, 0.0, -0.5, out.p_theta);
    assert_eq!(region_of(&out, s, &p).unwrap(), Region::B3);
    assert_eq!(region_of(&inw, s, &p).unwrap(), Region::B2);
}

#[test]
fn prototypical_trajectory_is_direct() {
    let p = p();
    let s = surfaces(2.0);
    let x = s.chart.unwrap().outward_point(0.0, 0.0, &p).unwrap();
    assert!(x.p_theta.abs() < 1e-12 && x.p_r > 0.0);
    let c = classify_trajectory(&x, s, T_MAX, Tolerances::default(), &p).unwrap();
    assert_eq!(c.class, TrajectoryClass::Direct);
    assert_eq!(c.middle, Crossings { outward: 1, inward: 0 });
    assert_eq!(c.outer, Crossings { outward: 1, inward: 0 });
    assert!(c.dissociated && !c.started_outside_middle);
    assert_eq!(c.origin, Some(Region::B1Plus));
}

#[test]
fn rasters_at_e5_are_fast_and_symmetric() {
    let p = p();
    let s = surfaces(5.0);
    let (lo, hi) = s.inner_plus.curve.extent();
    let half = lo.abs().min(hi);
    let grid = Grid::new((-half, half), (-6.0, 6.0), 12, 12);
    let res = residence_raster(RasterSection::InnerDs, grid, 5.0, 200.0, Tolerances::default(), &p).unwrap();
    assert!(res.count(CellStatus::Done) > 50);
    assert_eq!(res.count(CellStatus::Censored), 0);
    assert!(res.max_value().unwrap() < 9.0);
    // (σ, p_σ) ↦ (−σ, −p_σ) is the reflection symmetry at λ = 0.
    for j in 0..12 {
        for i in 0..12 {
            let a = res.cells[j * 12 + i];
            let b = res.cells[(11 - j) * 12 + (11 - i)];
            assert_eq!(a.status, b.status);
            if a.status == CellStatus::Done {
                assert!((a.value - b.value).abs() < 1e-6, "{a:?} {b:?}");
            }
        }
    }
    let mut csv = Vec::new();
    res.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 145);
    let mut side = Vec::new();
    res.write_sidecar(&mut side).unwrap();
    let meta: serde_json::Value = serde_json::from_slice(&side).unwrap();
    assert_eq!(meta["t_max"], 200.0);
    assert_eq!(meta["infeasible"].as_u64().unwrap() as usize, res.count(CellStatus::Infeasible));
}

#[test]
fn cell_on_the_outer_orbit_is_censored() {
    let p = p();
    let o = &surfaces(2.0).outer.as_ref().unwrap().generators[0];
    let r = o.point.r;
    let grid = Grid::new((r - 1e-9, r + 1e-9), (-1e-9, 1e-9), 1, 1);
    let res = residence_raster(RasterSection::ThetaZero, grid, 2.0, 60.0, shot_tolerances(), &p).unwrap();
    assert_eq!(res.cells[0].status, CellStatus::Censored);
    assert_eq!(res.cells[0].value, 60.0);
}

#[test]
fn radial_escape_rotates_less_than_once() {
    let p = p();
    let grid = Grid::new((1.2, 1.2), (9.0, 9.0), 1, 1);
    let rot = rotation_raster(RasterSection::ThetaZero, grid, 2.0, 1000.0, Tolerances::default(), &p).unwrap();
    assert_eq!(rot.cells[0].status, CellStatus::Done);
    assert!(rot.cells[0].value.abs() < 1.0);
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (k, &i) in idx.iter().enumerate() {
        r[i] = k as f64;
    }
    r
}

#[test]
fn rotation_tracks_residence_at_e1() {
    let p = p();
    let grid = Grid::new((2.0, 5.0), (-2.0, 2.0), 24, 24);
    let tol = Tolerances::sweep();
    let a = residence_raster(RasterSection::ThetaZero, grid, 1.0, 2000.0, tol, &p).unwrap();
    let b = rotation_raster(RasterSection::ThetaZero, grid, 1.0, 2000.0, tol, &p).unwrap();
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .cells
        .iter()
        .zip(&b.cells)
        .filter(|(u, _)| u.status == CellStatus::Done)
        .map(|(u, v)| (u.value, v.value.abs()))
        .unzip();
    assert!(x.len() > 100);
    let (rx, ry) = (ranks(&x), ranks(&y));
    let n = x.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mean) * (b - mean)).sum();
    let var: f64 = rx.iter().map(|a| (a - mean).powi(2)).sum();
    let rho = cov / var;
    assert!(rho > 0.8, "rank correlation {rho}");
}

#[test]
fn unstable_seed_grows_by_the_multiplier() {
    let p = p();
    let g = &surfaces(2.0).inner_plus.generators[0];
    let b = grow_manifold(g, ManifoldKind::Unstable, Side::Plus, 8, 1e-9, 0, &p).unwrap();
    assert!(b.energy_residual(&p) <= 1e-8);
    assert!(b.eigenvector[0] > 0.0);
    let run = Propagator::new(&p).tolerances(shot_tolerances()).run(&b.seeds[0].state, g.period).unwrap();
    let x = run.trajectory.final_state.to_array();
    let x0 = g.point.to_array();
    let d0: f64 = (0..4).map(|i| (b.seeds[0].state.to_array()[i] - x0[i]).powi(2)).sum::<f64>().sqrt();
    let d1: f64 = (0..4).map(|i| (x[i] - x0[i]).powi(2)).sum::<f64>().sqrt();
    let growth = d1 / d0;
    assert!((growth / b.multiplier - 1.0).abs() < 1e-2, "growth {growth} vs {}", b.multiplier);
}

#[test]
fn stable_orbit_has_no_manifold() {
    let p = p();
    let a = crate::porbit::seed_middle(3.0, &p).unwrap();
    assert!(matches!(
        grow_manifold(&a, ManifoldKind::Unstable, Side::Plus, 8, 1e-7, 0, &p),
        Err(TransportError::NotHyperbolic(_))
    ));
}

#[test]
fn gamma_curves_at_e2() {
    let p = p();
    let s = surfaces(2.0);
    let tol = Tolerances::sweep();
    let g = &s.inner_plus.generators[0];
    let mut bu = grow_manifold(g, ManifoldKind::Unstable, Side::Plus, 64, 1e-7, 600, &p).unwrap();
    let cu = manifold_section(&mut bu, s, SurfaceId::Middle, true, Occurrence::First, 1e-2, 500.0, tol, &p).unwrap();
    assert!(cu.closed(), "missing {:?}", cu.missing.len());
    assert_eq!(cu.winding(), 0);
    assert!(bu.energy_residual(&p) <= 1e-8);
    // Every image lies on the outward annulus.
    let mid = s.middle.as_ref().unwrap();
    for q in cu.points.iter().step_by(17) {
        assert!(annulus_point(mid, q.theta, q.p_theta * (1.0 - 1e-9), &p).is_some());
    }
    let o = &s.outer.as_ref().unwrap().generators[0];
    let mut bs = grow_manifold(o, ManifoldKind::Stable, Side::Minus, 64, 1e-7, 600, &p).unwrap();
    let cs = manifold_section(&mut bs, s, SurfaceId::Middle, true, Occurrence::Last, 1e-2, 500.0, tol, &p).unwrap();
    assert!(cs.closed());
    assert_eq!(cs.winding().abs(), 1);
    assert!(matches!(
        manifold_section(&mut bs, s, SurfaceId::Middle, true, Occurrence::First, 1e-2, 500.0, tol, &p),
        Err(TransportError::Invalid(_))
    ));
}

fn circle(cx: f64, cy: f64, rad: f64, n: usize) -> SectionCurve {
    let points = (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            SectionPoint { phase: k as f64 / n as f64, theta: cx + rad * a.cos(), p_theta: cy + rad * a.sin(), t: 0.0 }
        })
        .collect();
    SectionCurve { points, missing: Vec::new(), exhausted: false }
}

fn band_edge(level: f64, wiggle: f64, n: usize) -> SectionCurve {
    let points = (0..n)
        .map(|k| {
            let th = TAU * k as f64 / n as f64;
            SectionPoint { phase: k as f64 / n as f64, theta: th, p_theta: level + wiggle * (3.0 * th).sin(), t: 0.0 }
        })
        .collect();
    SectionCurve { points, missing: Vec::new(), exhausted: false }
}

#[test]
fn membership_of_loops_and_bands() {
    let disc = GammaSet::new("disc", vec![circle(0.2, 0.0, 0.5, 400)]);
    assert_eq!(disc.contains(0.2, 0.1), Some(true));
    assert_eq!(disc.contains(0.2 + TAU, 0.1), Some(true));
    assert_eq!(disc.contains(0.9, 0.0), Some(false));
    let band = GammaSet::new("band", vec![band_edge(-1.0, 0.2, 300), band_edge(1.0, 0.2, 300)]);
    assert_eq!(band.contains(2.0, 0.0), Some(true));
    assert_eq!(band.contains(2.0, 1.5), Some(false));
    assert_eq!(band.contains(-4.0, -1.5), Some(false));
    let mut open = circle(0.0, 0.0, 1.0, 50);
    open.missing.push(0.5);
    assert_eq!(GammaSet::new("open", vec![open]).contains(0.0, 0.0), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn membership_is_periodic_in_theta(th in -PI..PI, pt in -2.0f64..2.0, k in -3i32..3) {
        let set = GammaSet::new("mix", vec![circle(0.5, 0.3, 0.8, 200), band_edge(-1.5, 0.1, 200), band_edge(1.5, 0.1, 200)]);
        prop_assert_eq!(set.contains(th, pt), set.contains(th + TAU * k as f64, pt));
    }

    #[test]
    fn crossing_counts_are_consistent(sigma in -0.6f64..0.6, ps in -12.0f64..12.0) {
        let p = p();
        let s = surfaces(1.0);
        let chart = s.chart.unwrap();
        let Some(x) = chart.outward_point(sigma, ps, &p) else { return Ok(()) };
        prop_assert!((hamiltonian(&x, &p).unwrap() - 1.0).abs() < 1e-9);
        let c = classify_trajectory(&x, s, 2000.0, Tolerances::sweep(), &p).unwrap();
        if c.class != TrajectoryClass::Censored && !c.grazing {
            for id in [SurfaceId::InnerPlus, SurfaceId::InnerMinus, SurfaceId::Middle, SurfaceId::Outer] {
                let k = c.crossings(id);
                prop_assert!(k.outward.abs_diff(k.inward) <= 1, "{:?} {:?}", id, k);
            }
        }
        match c.class {
            TrajectoryClass::Roaming => prop_assert!(c.middle.total() >= 3),
            TrajectoryClass::Direct => {
                prop_assert_eq!(c.middle.outward, 1);
                prop_assert_eq!(c.outer.outward, 1);
            }
            _ => {}
        }
    }
}

#[test]
fn return_map_outcomes() {
    let p = p();
    let s = surfaces(2.0);
    let tol = shot_tolerances();
    match return_map_p(0.0, 0.0, s, 1000.0, tol, &p).unwrap() {
        ReturnOutcome::Escaped { .. } => {}
        other => panic!("{other:?}"),
    }
    assert!(return_map_p(0.0, 100.0, s, 1000.0, tol, &p).is_err());
    // Images land back on the outward annulus; near the middle orbits at E = 1 most
    // points return.
    let s = surfaces(1.0);
    let mid = s.middle.as_ref().unwrap();
    let pa = mid.generators[0].point.p_theta;
    let mut images = 0;
    for i in 0..16 {
        for j in 0..16 {
            let th = -PI + TAU * (i as f64 + 0.5) / 16.0;
            let pt = pa * ((j as f64 + 0.5) / 8.0 - 1.0);
            let Ok(ReturnOutcome::Image { theta, p_theta, .. }) = return_map_p(th, pt, s, 1000.0, tol, &p) else { continue };
            images += 1;
            assert!(p_theta.abs() <= pa.abs() * (1.0 + 1e-6));
            assert!(annulus_point(mid, theta, p_theta, &p).is_some());
        }
    }
    assert!(images > 0);
}
