//! Shooting residuals on the section `θ = 0` and their Jacobians.

use std::sync::Arc;

use crate::integrate::{Direction, EventSpec, Propagator, SurfaceFunction, TerminalReason, Tolerances};
use crate::model::{equations_of_motion, hamiltonian_gradient, potential_total, PhaseState};
use crate::Params;

use super::PorbitError;

/// Shooting problem used to close an orbit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Section {
    /// Brake orbit through `θ = 0`: start at `(r, 0, 0, p_θ)` and ask for `p_r = 0` at the
    /// first turning point `p_θ = 0`. The period is four times the shot.
    Brake,
    /// Rotating orbit through `θ = 0` and `θ = π/2` perpendicular to both rays; the period
    /// is four times the quarter shot.
    Rotating,
    /// Plain return to `θ = 0` (same sign of `p_θ`) after `returns` crossings; unknowns
    /// `(r, p_r)`.
    Return { returns: usize },
}

impl Section {
    pub fn unknowns(self) -> usize {
        match self {
            Section::Brake | Section::Rotating => 1,
            Section::Return { .. } => 2,
        }
    }

    /// Ratio of the period to the shooting time.
    pub(crate) fn period_factor(self) -> f64 {
        match self {
            Section::Brake | Section::Rotating => 4.0,
            Section::Return { .. } => 1.0,
        }
    }
}

/// `p_θ = value` as an event surface.
struct AngularMomentum;

impl SurfaceFunction<f64> for AngularMomentum {
    fn value(&self, s: &PhaseState<f64>) -> f64 {
        s.p_theta
    }
    fn gradient(&self, _s: &PhaseState<f64>) -> [f64; 4] {
        [0.0, 0.0, 0.0, 1.0]
    }
}

/// Solves `H(r, θ, p_r, p_θ) = E` for `p_θ` with the requested sign.
pub fn p_theta_on_shell(r: f64, theta: f64, p_r: f64, e: f64, sign: f64, p: &Params) -> Option<f64> {
    let u = potential_total(r, theta, p).ok()?;
    let mr2 = p.m * r * r;
    let a = 0.5 * (1.0 / p.inertia + 1.0 / mr2);
    let b = -p.lambda / mr2;
    let c = p.lambda * p.lambda / (2.0 * mr2) + p_r * p_r / (2.0 * p.m) + u - e;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(if sign >= 0.0 { (-b + sq) / (2.0 * a) } else { (-b - sq) / (2.0 * a) })
}

/// Point of the section with unknowns `u` (`[r]` or `[r, p_r]`) at energy `e`.
pub fn section_point(section: Section, u: &[f64], e: f64, sign: f64, p: &Params) -> Option<PhaseState<f64>> {
    let (r, pr) = match section {
        Section::Brake | Section::Rotating => (u[0], 0.0),
        Section::Return { .. } => (u[0], u[1]),
    };
    if !(r > p.r_cut && r < MAX_SECTION_RADIUS) {
        return None;
    }
    let pt = p_theta_on_shell(r, 0.0, pr, e, sign, p)?;
    Some(PhaseState::new(r, 0.0, pr, pt))
}

/// Residual `F(u, E)` with its Jacobian `[∂F/∂u | ∂F/∂E]`.
#[derive(Clone, Debug)]
pub struct Shot {
    pub f: Vec<f64>,
    /// `n × (n + 1)` row-major.
    pub jac: Vec<Vec<f64>>,
    pub time: f64,
    pub start: PhaseState<f64>,
}

pub(crate) const SHOT_TIME_LIMIT: f64 = 2000.0;
/// Section points beyond this radius are rejected; far-field orbits this large only exist
/// for energies within ~1e-4 of zero.
pub const MAX_SECTION_RADIUS: f64 = 500.0;

pub fn shot_tolerances() -> Tolerances {
    Tolerances { rtol: 1e-13, atol: 1e-13, drift_rel: None, ..Tolerances::default() }
}

/// Integrates one shot with the linearized flow and differentiates the residual.
pub fn shoot(section: Section, u: &[f64], e: f64, sign: f64, p: &Params) -> Result<Shot, PorbitError> {
    let x0 = section_point(section, u, e, sign, p).ok_or(PorbitError::OffShell { e })?;
    let dh = hamiltonian_gradient(&x0, p)?;
    let h_pt = dh[3];
    if h_pt.abs() < 1e-12 {
        return Err(PorbitError::SingularJacobian);
    }
    // Tangents of the start point in the unknowns and in E (p_θ follows the energy).
    let mut dirs: Vec<[f64; 4]> = vec![[1.0, 0.0, 0.0, -dh[0] / h_pt]];
    if section.unknowns() == 2 {
        dirs.push([0.0, 0.0, 1.0, -dh[2] / h_pt]);
    }
    dirs.push([0.0, 0.0, 0.0, 1.0 / h_pt]);

    let dir = if sign >= 0.0 { Direction::Increasing } else { Direction::Decreasing };
    // The target event is always index 0; the others abort the shot.
    let (mut events, grad_index) = match section {
        Section::Brake => (vec![EventSpec::custom(Arc::new(AngularMomentum), Direction::Both).terminal()], 3),
        Section::Rotating => (
            vec![
                EventSpec::angle(sign.signum() * std::f64::consts::FRAC_PI_2, dir).terminal(),
                EventSpec::custom(Arc::new(AngularMomentum), Direction::Both).terminal(),
            ],
            1,
        ),
        Section::Return { returns } => (
            vec![
                EventSpec::angle(0.0, dir).max_count(returns),
                EventSpec::custom(Arc::new(AngularMomentum), Direction::Both).terminal(),
            ],
            1,
        ),
    };
    events.push(EventSpec::radius((3.0 * x0.r).max(60.0), Direction::Increasing).terminal());
    let run = Propagator::new(p)
        .tolerances(shot_tolerances())
        .events(events)
        .run_variational(&x0, SHOT_TIME_LIMIT)?;
    let last = run.log.records.last();
    let hit = match (section, run.trajectory.terminal_reason, last) {
        (Section::Return { .. }, TerminalReason::EventQuota, Some(rec)) if rec.event == 0 => rec,
        (Section::Brake | Section::Rotating, TerminalReason::Event, Some(rec)) if rec.event == 0 => rec,
        _ => return Err(PorbitError::MissedSection { e }),
    };
    let y = hit.state;
    let m = run.monodromy.expect("variational run");
    let fv = equations_of_motion(&y, p)?;
    // Normal of the target surface; the angle event has unit θ-gradient on the ray.
    let mut ng = [0.0; 4];
    ng[grad_index] = 1.0;
    let ngf: f64 = (0..4).map(|k| ng[k] * fv[k]).sum();
    if ngf.abs() < 1e-10 {
        return Err(PorbitError::SingularJacobian);
    }
    let dy = |v: &[f64; 4]| -> [f64; 4] {
        let mv: [f64; 4] = std::array::from_fn(|i| (0..4).map(|k| m[i][k] * v[k]).sum());
        let dt = -(0..4).map(|k| ng[k] * mv[k]).sum::<f64>() / ngf;
        std::array::from_fn(|i| mv[i] + fv[i] * dt)
    };
    let cols: Vec<[f64; 4]> = dirs.iter().map(dy).collect();
    let (f, jac) = match section {
        Section::Brake | Section::Rotating => (vec![y.p_r], vec![cols.iter().map(|c| c[2]).collect()]),
        Section::Return { .. } => {
            let f = vec![y.r - x0.r, y.p_r - x0.p_r];
            let mut row0: Vec<f64> = cols.iter().map(|c| c[0]).collect();
            let mut row1: Vec<f64> = cols.iter().map(|c| c[2]).collect();
            row0[0] -= 1.0;
            row1[1] -= 1.0;
            (f, vec![row0, row1])
        }
    };
    Ok(Shot { f, jac, time: hit.t, start: x0 })
}
