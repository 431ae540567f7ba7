//! Periodic-orbit families: shooting, monodromy, residues, continuation and bifurcations.

mod bifurcation;
mod continuation;
mod export;
mod seed;
mod shoot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{IntegrateError, Propagator};
use crate::model::{ModelError, PhaseState};
use crate::real::wrap_signed;
use crate::Params;

pub use bifurcation::{detect_bifurcations, detect_collisions, Bifurcation, BifurcationKind};
pub use continuation::{continue_family, Family, StepControl};
pub use export::{write_family_csv, FAMILY_CSV_HEADER};
pub use seed::{scan_section, seed_b, seed_inner, seed_middle, seed_outer, track, ANCHOR_ENERGY};
pub use shoot::{p_theta_on_shell, section_point, shoot, Section, Shot, MAX_SECTION_RADIUS};

pub use shoot::shot_tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PorbitError {
    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("singular shooting Jacobian (orbit tangent to the section)")]
    SingularJacobian,
    #[error("no point of the section lies on the energy surface E = {e}")]
    OffShell { e: f64 },
    #[error("trajectory did not return to the section at E = {e}")]
    MissedSection { e: f64 },
    #[error("continuation stalled at E = {e}: {reason}")]
    Stalled { e: f64, reason: String },
    #[error("no seed found: {0}")]
    NoSeed(String),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Inner,
    Outer,
    Middle,
    B,
    Other,
}

impl FamilyKind {
    pub fn symbol(self) -> &'static str {
        match self {
            FamilyKind::Inner => "i",
            FamilyKind::Outer => "o",
            FamilyKind::Middle => "a",
            FamilyKind::B => "b",
            FamilyKind::Other => "x",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
    None,
}

impl Sign {
    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
            Sign::None => "",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FamilyTag {
    pub kind: FamilyKind,
    pub sign: Sign,
}

impl FamilyTag {
    pub const fn new(kind: FamilyKind, sign: Sign) -> Self {
        Self { kind, sign }
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.kind.symbol(), self.sign.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitKind {
    Brake,
    Rotating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Hyperbolic,
    Elliptic,
    InverseHyperbolic,
}

impl Stability {
    pub fn from_residue(r: f64) -> Self {
        if r < 0.0 {
            Stability::Hyperbolic
        } else if r <= 1.0 {
            Stability::Elliptic
        } else {
            Stability::InverseHyperbolic
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Hyperbolic => "hyperbolic",
            Stability::Elliptic => "elliptic",
            Stability::InverseHyperbolic => "inverse_hyperbolic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Point on the section `θ = 0` (the turning-point symmetry line for brake orbits).
    pub point: PhaseState<f64>,
    pub period: f64,
    pub energy: f64,
    pub family: FamilyTag,
    pub kind: OrbitKind,
    pub section: Section,
    pub action: f64,
    pub residue: f64,
    /// Residue of the half-period map for orbits invariant under `θ ↦ θ + π` (the
    /// symmetric rotating orbits); the rotation acts trivially on tangent vectors, so
    /// `M = M_½²` and `R = 4 R_½ (1 − R_½)`.
    pub reduced_residue: Option<f64>,
    pub stability: Stability,
    pub monodromy: [[f64; 4]; 4],
    /// `‖Φ_T(x₀) − x₀‖` with `θ` compared modulo `2π`.
    pub closure: f64,
}

impl PeriodicOrbit {
    pub fn with_family(mut self, family: FamilyTag) -> Self {
        self.family = family;
        self
    }

    /// Section unknowns `[r]` or `[r, p_r]`.
    pub fn unknowns(&self) -> Vec<f64> {
        match self.section {
            Section::Return { .. } => vec![self.point.r, self.point.p_r],
            _ => vec![self.point.r],
        }
    }

    pub(crate) fn sign(&self) -> f64 {
        if self.point.p_theta < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// The `−` partner of a `+` orbit (and vice versa): the reflection
    /// `(r, θ, p_r, p_θ) ↦ (r, −θ, p_r, −p_θ)` for rotating orbits, the rotation by `π`
    /// for brake orbits (which are reflection invariant).
    pub fn partner(&self, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
        let sign = match self.family.sign {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
            Sign::None => Sign::None,
        };
        let x = match self.kind {
            OrbitKind::Rotating => self.point.reflected(),
            OrbitKind::Brake => PhaseState::new(self.point.r, self.point.theta + std::f64::consts::PI, self.point.p_r, self.point.p_theta),
        };
        Ok(evaluate(x, self.period, self.section, p)?.with_family(FamilyTag { sign, ..self.family }))
    }
}

/// Greene residue `R = (4 − Tr M)/4`.
pub fn greene_residue(m: &[[f64; 4]; 4]) -> f64 {
    (4.0 - (m[0][0] + m[1][1] + m[2][2] + m[3][3])) / 4.0
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-10;

/// Newton iteration at fixed energy. The guess is projected onto the section and energy
/// surface by keeping `(r, p_r)` and recomputing `p_θ`; its sign selects the orientation.
pub fn refine_orbit(guess: &PhaseState<f64>, e: f64, section: Section, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    let sign = if guess.p_theta < 0.0 { -1.0 } else { 1.0 };
    let mut u = match section {
        Section::Return { .. } => vec![guess.r, guess.p_r],
        _ => vec![guess.r],
    };
    let n = u.len();
    let mut last = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let shot = shoot(section, &u, e, sign, p)?;
        let res = norm(&shot.f);
        if res < NEWTON_TOL {
            // One more correction sharpens the fixed point to roundoff.
            if let Ok(step) = solve_square(&shot.jac, &shot.f, n) {
                let u2: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a - b).collect();
                if let Ok(s2) = shoot(section, &u2, e, sign, p) {
                    if norm(&s2.f) <= res {
                        return finish(section, &u2, e, sign, &s2, p);
                    }
                }
            }
            return finish(section, &u, e, sign, &shot, p);
        }
        let step = solve_square(&shot.jac, &shot.f, n)?;
        // Damped update: halve while the residual grows or the shot fails.
        let mut lam = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a - lam * b).collect();
            match shoot(section, &trial, e, sign, p) {
                Ok(s) if norm(&s.f) < res || lam < 1e-3 => {
                    u = trial;
                    break;
                }
                _ if lam < 1e-3 => return Err(PorbitError::NoConvergence { iterations: 0, residual: res }),
                _ => lam *= 0.5,
            }
        }
        last = res;
    }
    Err(PorbitError::NoConvergence { iterations: NEWTON_MAX_ITER, residual: last })
}

fn finish(section: Section, u: &[f64], e: f64, sign: f64, shot: &Shot, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    let x0 = section_point(section, u, e, sign, p).ok_or(PorbitError::OffShell { e })?;
    evaluate(x0, shot.time * section.period_factor(), section, p)
}

/// Monodromy, action and closure of the orbit through `x0` with period `period`.
pub(crate) fn evaluate(x0: PhaseState<f64>, period: f64, section: Section, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    let run = Propagator::new(p).tolerances(shot_tolerances()).with_action(true).run_variational(&x0, period)?;
    let m = run.monodromy.expect("variational run");
    let y = run.trajectory.final_state;
    let d = [y.r - x0.r, wrap_signed(y.theta - x0.theta), y.p_r - x0.p_r, y.p_theta - x0.p_theta];
    let residue = greene_residue(&m);
    let e = crate::model::hamiltonian(&x0, p)?;
    let reduced_residue = if section == Section::Rotating {
        let half = Propagator::new(p).tolerances(shot_tolerances()).run_variational(&x0, 0.5 * period)?;
        Some(greene_residue(&half.monodromy.expect("variational run")))
    } else {
        None
    };
    Ok(PeriodicOrbit {
        point: x0,
        period,
        energy: e,
        family: FamilyTag::new(FamilyKind::Other, Sign::None),
        kind: if section == Section::Brake { OrbitKind::Brake } else { OrbitKind::Rotating },
        section,
        action: run.action,
        residue,
        reduced_residue,
        stability: Stability::from_residue(residue),
        monodromy: m,
        closure: norm(&d),
    })
}

/// `M(T)` over one period of a converged orbit.
pub fn monodromy(orbit: &PeriodicOrbit, p: &Params) -> Result<[[f64; 4]; 4], PorbitError> {
    let run = Propagator::new(p).tolerances(shot_tolerances()).run_variational(&orbit.point, orbit.period)?;
    Ok(run.monodromy.expect("variational run"))
}

/// `∮ p_r dr + p_θ dθ` over one period.
pub fn action(orbit: &PeriodicOrbit, p: &Params) -> Result<f64, PorbitError> {
    let run = Propagator::new(p).tolerances(shot_tolerances()).with_action(true).run(&orbit.point, orbit.period)?;
    Ok(run.action)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves the leading `n × n` block of `jac` against `f`.
pub(crate) fn solve_square(jac: &[Vec<f64>], f: &[f64], n: usize) -> Result<Vec<f64>, PorbitError> {
    let a = nalgebra::DMatrix::from_fn(n, n, |i, k| jac[i][k]);
    let b = nalgebra::DVector::from_column_slice(&f[..n]);
    let scale = a.amax().max(1e-300);
    let lu = a.lu();
    let x = lu.solve(&b).ok_or(PorbitError::SingularJacobian)?;
    if x.iter().any(|v| !v.is_finite()) || lu_condition_bad(&lu, scale) {
        return Err(PorbitError::SingularJacobian);
    }
    Ok(x.iter().copied().collect())
}

fn lu_condition_bad(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, scale: f64) -> bool {
    let u = lu.u();
    (0..u.nrows()).any(|i| u[(i, i)].abs() < 1e-14 * scale)
}

#[cfg(test)]
mod tests;
