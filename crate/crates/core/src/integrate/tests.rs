use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use super::*;
use crate::model::{equations_of_motion, hamiltonian};

fn p() -> ModelParams<f64> {
    ModelParams::default()
}

/// State at `(r, θ)` with `p_r = 0` and `p_θ > 0` chosen to put it at energy `e`.
fn lifted(r: f64, th: f64, e: f64, frac_radial: f64) -> PhaseState<f64> {
    let p = p();
    let ke = e - crate::model::potential_total(r, th, &p).unwrap();
    assert!(ke > 0.0);
    let b = crate::model::angular_inverse_mass(r, &p);
    let pr = (2.0 * p.m * ke * frac_radial).sqrt();
    let pt = (2.0 * ke * (1.0 - frac_radial) / b).sqrt();
    PhaseState::new(r, th, pr, pt)
}

#[test]
fn equilibrium_stays_put() {
    let p = p();
    let s = PhaseState::new(1.1, 0.0, 0.0, 0.0);
    let tr = integrate(&s, &p, 50.0, &Tolerances::default()).unwrap();
    let d = tr.final_state;
    assert!((d.r - s.r).abs() < 1e-12 && d.p_r.abs() < 1e-12 && d.theta == 0.0 && d.p_theta == 0.0);
    assert_eq!(tr.terminal_reason, TerminalReason::TimeLimit);
}

#[test]
fn reversibility() {
    let p = p();
    let s = lifted(2.3, 0.4, 2.0, 0.3);
    let tol = Tolerances::default();
    let fwd = integrate(&s, &p, 7.0, &tol).unwrap();
    assert_eq!(fwd.terminal_reason, TerminalReason::TimeLimit);
    let back = integrate(&fwd.final_state.reversed(), &p, 7.0, &tol).unwrap();
    let e = back.final_state.reversed();
    let err = (e.r - s.r).abs() + (e.theta - s.theta).abs() + (e.p_r - s.p_r).abs() + (e.p_theta - s.p_theta).abs();
    assert!(err < 1e-8, "{err}");
    let neg = Propagator::new(&p).run(&fwd.final_state, -7.0).unwrap().trajectory.final_state;
    assert!((neg.r - s.r).abs() < 1e-8 && (neg.p_theta - s.p_theta).abs() < 1e-8);
}

#[test]
fn energy_is_held() {
    let p = p();
    let s = lifted(2.0, 0.3, 5.0, 0.5);
    let tr = integrate(&s, &p, 500.0, &Tolerances::default()).unwrap();
    assert!(tr.energy_drift <= 5e-8, "{}", tr.energy_drift);
    for (_, x) in &tr.samples {
        assert!((hamiltonian(x, &p).unwrap() - 5.0).abs() <= 5e-8);
    }
    assert!(tr.samples.windows(2).all(|w| w[1].0 > w[0].0));
}

#[test]
fn terminal_radius_and_events() {
    let p = p();
    // Prototypical dissociating start: θ = 0, p_θ = 0, outgoing.
    let s = lifted(1.1, 0.0, 2.0, 1.0);
    let ev = vec![
        EventSpec::radius(3.0, Direction::Increasing),
        EventSpec::radius(15.0, Direction::Increasing).terminal(),
    ];
    let (tr, log) = integrate_with_events(&s, &p, ev, 1000.0, &Tolerances::default()).unwrap();
    assert_eq!(tr.terminal_reason, TerminalReason::RTerminal);
    assert!((tr.final_state.r - 15.0).abs() < 1e-9);
    assert_eq!(log.count(0), 1);
    assert_eq!(log.count(1), 1);
    let rec = log.crossings(0).next().unwrap();
    assert!((rec.state.r - 3.0).abs() < 1e-9);
    assert_eq!(rec.sign, 1);
}

#[test]
fn trapped_below_zero_energy() {
    let p = p();
    let s = lifted(1.3, 0.2, -5.0, 0.6);
    let ev = vec![EventSpec::radius(15.0, Direction::Increasing).terminal()];
    let (tr, log) = integrate_with_events(&s, &p, ev, 200.0, &Tolerances::default()).unwrap();
    assert!(matches!(tr.terminal_reason, TerminalReason::TimeLimit | TerminalReason::Cutoff));
    assert_eq!(log.count(0), 0);
}

#[test]
fn cutoff_terminates() {
    let p = p();
    // Straight in along θ = 0 with enough energy to reach r_cut.
    let s = PhaseState::new(2.0, 0.0, -3.0, 0.0);
    let tr = integrate(&s, &p, 50.0, &Tolerances::default()).unwrap();
    assert_eq!(tr.terminal_reason, TerminalReason::Cutoff);
    assert!((tr.final_state.r - p.r_cut).abs() < 1e-9);
}

#[test]
fn angle_section_counts_turns() {
    let p = p();
    // Outside the outer orbit the motion escapes while rotating steadily.
    let s = lifted(12.0, 0.1, 2.0, 0.0);
    let ev = vec![EventSpec::angle(0.0, Direction::Increasing)];
    let run = Propagator::new(&p).events(ev).run(&s, 60.0).unwrap();
    let turns = (run.trajectory.final_state.theta - s.theta) / (2.0 * PI);
    let n = run.log.count(0);
    assert!(turns > 5.0);
    assert_eq!(n as f64, turns.floor(), "{n} {turns}");
    for r in run.log.crossings(0) {
        assert!(r.state.theta.sin().abs() < 1e-9 && r.state.theta.cos() > 0.0);
    }
}

struct Parabola;

impl SurfaceFunction<f64> for Parabola {
    // g = θ − 0.5·(r − 2)²·0 + … a function of θ whose minimum along a rotating orbit grazes zero.
    fn value(&self, s: &PhaseState<f64>) -> f64 {
        (s.theta - 1.0) * (s.theta - 1.0) - 0.04
    }
    fn gradient(&self, s: &PhaseState<f64>) -> [f64; 4] {
        [0.0, 2.0 * (s.theta - 1.0), 0.0, 0.0]
    }
}

#[test]
fn double_crossing_inside_one_step() {
    // (θ − 1)² − 0.04 vanishes twice, at θ = 0.8 and 1.2, with a big step covering both.
    let p = p();
    let s = lifted(8.0, 0.0, 2.0, 0.0);
    let tol = Tolerances { h_max: 50.0, ..Tolerances::default() };
    let ev = vec![EventSpec::custom(Arc::new(Parabola), Direction::Both)];
    let run = Propagator::new(&p).tolerances(tol).events(ev).run(&s, 3.0).unwrap();
    let hits: Vec<_> = run.log.crossings(0).collect();
    if run.trajectory.final_state.theta > 1.2 {
        assert_eq!(hits.len(), 2, "{hits:?}");
        assert!((hits[0].state.theta - 0.8).abs() < 1e-9 && hits[0].sign == -1);
        assert!((hits[1].state.theta - 1.2).abs() < 1e-9 && hits[1].sign == 1);
    }
}

struct Tangent;

impl SurfaceFunction<f64> for Tangent {
    fn value(&self, s: &PhaseState<f64>) -> f64 {
        (s.theta - 1.0) * (s.theta - 1.0)
    }
    fn gradient(&self, s: &PhaseState<f64>) -> [f64; 4] {
        [0.0, 2.0 * (s.theta - 1.0), 0.0, 0.0]
    }
}

#[test]
fn tangency_is_grazing_not_crossing() {
    let p = p();
    let s = lifted(8.0, 0.0, 2.0, 0.0);
    let ev = vec![EventSpec::custom(Arc::new(Tangent), Direction::Both)];
    let run = Propagator::new(&p).events(ev).run(&s, 3.0).unwrap();
    if run.trajectory.final_state.theta > 1.1 {
        assert_eq!(run.log.count(0), 0);
        assert!(run.log.records.iter().any(|r| r.grazing));
    }
}

#[test]
fn event_quota_stops() {
    let p = p();
    let s = lifted(6.0, 0.1, 2.0, 0.0);
    let ev = vec![EventSpec::angle(FRAC_PI_2, Direction::Increasing).max_count(1)];
    let run = Propagator::new(&p).events(ev).run(&s, 1000.0).unwrap();
    assert_eq!(run.trajectory.terminal_reason, TerminalReason::EventQuota);
    assert_eq!(run.log.count(0), 1);
}

#[test]
fn tighter_tolerance_moves_events_little() {
    let p = p();
    let s = lifted(2.2, 0.3, 1.0, 0.4);
    let ev = || vec![EventSpec::radius(2.5, Direction::Both)];
    let a = Propagator::new(&p).events(ev()).run(&s, 40.0).unwrap();
    let b = Propagator::new(&p).tolerances(Tolerances::default().scaled(0.1)).events(ev()).run(&s, 40.0).unwrap();
    assert_eq!(a.log.count(0), b.log.count(0));
    for (x, y) in a.log.crossings(0).zip(b.log.crossings(0)) {
        assert!((x.t - y.t).abs() < 1e-8, "{} {}", x.t, y.t);
    }
}

#[test]
fn variational_identity_at_start_and_symplectic() {
    let p = p();
    let s = lifted(2.2, 0.3, 2.0, 0.4);
    let tol = Tolerances::default();
    let v0 = integrate_variational(&s, &p, 1e-9, &tol).unwrap();
    for i in 0..4 {
        for k in 0..4 {
            let id = if i == k { 1.0 } else { 0.0 };
            assert!((v0.m[i][k] - id).abs() < 1e-6);
        }
    }
    let v = integrate_variational(&s, &p, 5.0, &tol).unwrap();
    assert!((v.det() - 1.0).abs() < 1e-6, "{}", v.det());
    assert!(v.symplectic_defect() < 1e-6);
}

#[test]
fn variational_matches_finite_differences() {
    let p = p();
    let s = lifted(2.2, 0.3, 2.0, 0.4);
    let tol = Tolerances { drift_rel: None, ..Tolerances::default() };
    let t = 2.0;
    let v = integrate_variational(&s, &p, t, &tol).unwrap();
    let h = 1e-6;
    for k in 0..4 {
        let mut a = s.to_array();
        let mut b = s.to_array();
        a[k] += h;
        b[k] -= h;
        let ya = Propagator::new(&p).tolerances(tol).run(&PhaseState::from_slice(&a), t).unwrap();
        let yb = Propagator::new(&p).tolerances(tol).run(&PhaseState::from_slice(&b), t).unwrap();
        let (ya, yb) = (ya.trajectory.final_state.to_array(), yb.trajectory.final_state.to_array());
        for i in 0..4 {
            let fd = (ya[i] - yb[i]) / (2.0 * h);
            assert!((v.m[i][k] - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{i}{k} {} {fd}", v.m[i][k]);
        }
    }
    // Flow vector is transported by M.
    let f0 = equations_of_motion(&s, &p).unwrap();
    let f1 = equations_of_motion(&v.base, &p).unwrap();
    for i in 0..4 {
        let mf: f64 = (0..4).map(|k| v.m[i][k] * f0[k]).sum();
        assert!((mf - f1[i]).abs() < 1e-7 * (1.0 + f1[i].abs()));
    }
}

#[test]
fn action_accumulates() {
    let p = p();
    let s = lifted(2.2, 0.3, 2.0, 0.4);
    let run = Propagator::new(&p).with_action(true).sampling(Sampling::Uniform(1e-3)).run(&s, 1.0).unwrap();
    // Trapezoid on the dense samples as an independent estimate.
    let mut acc = 0.0;
    let integrand = |x: &PhaseState<f64>| {
        let f = equations_of_motion(x, &p).unwrap();
        x.p_r * f[0] + x.p_theta * f[1]
    };
    for w in run.trajectory.samples.windows(2) {
        acc += 0.5 * (w[1].0 - w[0].0) * (integrand(&w[0].1) + integrand(&w[1].1));
    }
    assert!((acc - run.action).abs() < 1e-5 * run.action.abs(), "{acc} {}", run.action);
}

#[test]
fn single_precision_flow() {
    let p = ModelParams::<f32>::default();
    let s = PhaseState::new(2.2f32, 0.3, 1.0, 1.0);
    let tol = Tolerances { rtol: 1e-6, atol: 1e-6, h_min: 1e-7, drift_rel: None, ..Tolerances::default() };
    let tr = integrate(&s, &p, 5.0f32, &tol).unwrap();
    assert!(tr.energy_drift < 1e-3);
}

#[test]
fn det_of_known_matrix() {
    let m: [[f64; 4]; 4] = [[2.0, 0.0, 0.0, 1.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 3.0, 0.0], [1.0, 0.0, 0.0, 1.0]];
    assert!((det4(&m) - 3.0).abs() < 1e-14);
}

#[test]
fn non_finite_start_is_rejected() {
    let p = p();
    let s = PhaseState::new(2.0, 0.0, f64::NAN, 1.0);
    assert!(matches!(Propagator::new(&p).run(&s, 1.0), Err(IntegrateError::NonFinite)));
}
