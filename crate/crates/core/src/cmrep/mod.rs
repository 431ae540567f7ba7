//! Conley–McGehee style representations of the energy surface as nested shells indexed
//! by `r`: the toric map above `E₂` and the `r⁶`-weighted map for `0 ≤ E ≤ Ẽ₁`.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{find_critical_points, hill_roots, potential_jet, potential_total, CriticalLabel, ModelError, PhaseState};
use crate::Params;

/// `θ` samples on `[0, π/2]`; the potential is even in `θ` and in `π − θ`.
pub const THETA_GRID: usize = 4096;
/// Radial offset of the optional shifted representation.
pub const R_SHIFT: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmError {
    #[error("E = {e} is outside the {kind} map's range: {reason}")]
    Regime { e: f64, kind: &'static str, reason: String },
    #[error("state is not strictly inside the Hill region (E − U = {0})")]
    NotInterior(f64),
    #[error("r = {r} is below r_E = {r_e}; the representation omits part of the wells there")]
    BelowRE { r: f64, r_e: f64 },
    #[error("the shell maps assume zero total angular momentum (λ = {0})")]
    NonzeroLambda(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Toric,
    Extended,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMPoint {
    pub theta: f64,
    pub p_r: f64,
    pub p_theta: f64,
    /// Shell index.
    pub r: f64,
    pub kind: MapKind,
}

impl CMPoint {
    pub fn radius_sq(&self) -> f64 {
        self.p_r * self.p_r + self.p_theta * self.p_theta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellTopology {
    Torus,
    PinchedTorus,
    TwoSpheres,
}

impl ShellTopology {
    pub fn as_str(self) -> &'static str {
        match self {
            ShellTopology::Torus => "torus",
            ShellTopology::PinchedTorus => "pinched_torus",
            ShellTopology::TwoSpheres => "two_spheres",
        }
    }
}

/// `Ẽ₁` (the `q̃₁` saddles) and `E₂` (the `q₂` maxima).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevels {
    pub e1_tilde: f64,
    pub e2: f64,
}

pub fn energy_levels(p: &Params) -> Result<EnergyLevels, CmError> {
    let cps = find_critical_points(p);
    let find = |l: CriticalLabel| {
        cps.iter()
            .find(|c| c.label == l)
            .map(|c| c.energy)
            .ok_or_else(|| ModelError::NoRoot(format!("critical point {} not found", l.as_str())))
    };
    Ok(EnergyLevels { e1_tilde: find(CriticalLabel::Q1TildePlus)?, e2: find(CriticalLabel::Q2Plus)? })
}

/// A shell map at a fixed energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmMap {
    pub kind: MapKind,
    pub energy: f64,
    /// Lower end of the shell index for the extended map.
    pub r_e: Option<f64>,
    /// `r` is replaced by `r − shift` in the weights.
    pub shift: f64,
}

fn check_lambda(p: &Params) -> Result<(), CmError> {
    if p.lambda != 0.0 {
        return Err(CmError::NonzeroLambda(p.lambda));
    }
    Ok(())
}

impl CmMap {
    /// Toric map, valid for `E > E₂`.
    pub fn toric(e: f64, p: &Params) -> Result<Self, CmError> {
        check_lambda(p)?;
        let lv = energy_levels(p)?;
        if e <= lv.e2 {
            return Err(regime_error(e, MapKind::Toric, &lv));
        }
        Ok(Self { kind: MapKind::Toric, energy: e, r_e: None, shift: 0.0 })
    }

    /// `r⁶`-weighted map, valid for `0 ≤ E ≤ Ẽ₁` and `r ≥ r_E`.
    pub fn extended(e: f64, p: &Params) -> Result<Self, CmError> {
        check_lambda(p)?;
        let lv = energy_levels(p)?;
        if !(0.0..=lv.e1_tilde).contains(&e) {
            return Err(regime_error(e, MapKind::Extended, &lv));
        }
        Ok(Self { kind: MapKind::Extended, energy: e, r_e: Some(r_e_unchecked(e, p)?), shift: 0.0 })
    }

    /// The map valid at `e`, if any.
    pub fn for_energy(e: f64, p: &Params) -> Result<Self, CmError> {
        let lv = energy_levels(p)?;
        if e > lv.e2 {
            Self::toric(e, p)
        } else {
            Self::extended(e, p)
        }
    }

    pub fn with_shift(mut self, on: bool) -> Self {
        self.shift = if on { R_SHIFT } else { 0.0 };
        self
    }

    /// Squared shell radius at `(r, θ)`: `(r − s)²` (toric) or `(r − s)⁶ (E − U)` (extended).
    pub fn shell_radius_sq(&self, r: f64, theta: f64, p: &Params) -> Result<f64, CmError> {
        let x = r - self.shift;
        Ok(match self.kind {
            MapKind::Toric => x * x,
            MapKind::Extended => x.powi(6) * (self.energy - potential_total(r, theta, p)?),
        })
    }

    pub fn map(&self, s: &PhaseState<f64>, p: &Params) -> Result<CMPoint, CmError> {
        if let Some(r_e) = self.r_e {
            if s.r < r_e {
                return Err(CmError::BelowRE { r: s.r, r_e });
            }
        }
        self.map_any(s, p)
    }

    /// [`CmMap::map`] without the `r ≥ r_E` restriction, for overlays; shells below `r_E`
    /// may intersect.
    pub fn map_any(&self, s: &PhaseState<f64>, p: &Params) -> Result<CMPoint, CmError> {
        let x = s.r - self.shift;
        let c = 1.0 / p.inertia + 1.0 / (p.m * s.r * s.r);
        let (pr, pt) = match self.kind {
            MapKind::Toric => {
                let k = self.energy - potential_total(s.r, s.theta, p)?;
                if k <= 0.0 {
                    return Err(CmError::NotInterior(k));
                }
                (x * s.p_r / (2.0 * p.m * k).sqrt(), x * c.sqrt() * s.p_theta / (2.0 * k).sqrt())
            }
            MapKind::Extended => {
                let x3 = x.powi(3);
                (x3 * s.p_r / (2.0 * p.m).sqrt(), x3 * (0.5 * c).sqrt() * s.p_theta)
            }
        };
        Ok(CMPoint { theta: s.theta, p_r: pr, p_theta: pt, r: s.r, kind: self.kind })
    }

    /// Shell at `r0`: `n_phi` fiber points at each of `n_theta` angles where `U < E`. Not
    /// restricted to `r0 ≥ r_E`.
    pub fn shell(&self, r0: f64, n_theta: usize, n_phi: usize, p: &Params) -> Result<Vec<CMPoint>, CmError> {
        let mut out = Vec::new();
        let a = 0.5 / p.inertia + 0.5 / (p.m * r0 * r0);
        for i in 0..n_theta {
            let th = std::f64::consts::TAU * i as f64 / n_theta as f64;
            let k = self.energy - potential_total(r0, th, p)?;
            if k <= 0.0 {
                continue;
            }
            for j in 0..n_phi {
                let phi = std::f64::consts::TAU * j as f64 / n_phi as f64;
                let s = PhaseState::new(r0, th, (2.0 * p.m * k).sqrt() * phi.cos(), (k / a).sqrt() * phi.sin());
                out.push(self.map_any(&s, p)?);
            }
        }
        Ok(out)
    }
}

fn regime_error(e: f64, kind: MapKind, lv: &EnergyLevels) -> CmError {
    let reason = if e > lv.e1_tilde && e <= lv.e2 {
        format!(
            "for {:.4} < E ≤ {:.4} the energy surface has genus-3 fixed-r sections and neither shell map applies",
            lv.e1_tilde, lv.e2
        )
    } else {
        match kind {
            MapKind::Toric => format!("needs E > E₂ = {:.4}", lv.e2),
            MapKind::Extended => format!("needs 0 ≤ E ≤ Ẽ₁ = {:.4}", lv.e1_tilde),
        }
    };
    CmError::Regime { e, kind: if kind == MapKind::Toric { "toric" } else { "extended" }, reason }
}

pub fn to_toric_cm(s: &PhaseState<f64>, e: f64, p: &Params) -> Result<CMPoint, CmError> {
    CmMap::toric(e, p)?.map(s, p)
}

/// Computes `r_E` on every call; build a [`CmMap`] once for bulk use.
pub fn to_extended_cm(s: &PhaseState<f64>, e: f64, p: &Params) -> Result<CMPoint, CmError> {
    CmMap::extended(e, p)?.map(s, p)
}

fn thetas() -> impl Iterator<Item = f64> {
    (0..=THETA_GRID).map(|k| FRAC_PI_2 * k as f64 / THETA_GRID as f64)
}

/// Second largest root of `U(·, θ) = E`.
fn inner_root(e: f64, theta: f64, p: &Params) -> Option<f64> {
    let roots = hill_roots(e, theta, p);
    (roots.len() >= 2).then(|| roots[roots.len() - 2])
}

/// Newton on `U = E, ∂U/∂r = 0`: a fold of the equipotential seen along rays.
fn fold(e: f64, r0: f64, th0: f64, p: &Params) -> Option<(f64, f64)> {
    let (mut r, mut th) = (r0, th0);
    for _ in 0..50 {
        let j = potential_jet(r, th, p).ok()?;
        let (f0, f1) = (j.u - e, j.u_r);
        let det = j.u_r * j.u_rth - j.u_th * j.u_rr;
        if det == 0.0 {
            return None;
        }
        let dr = (f0 * j.u_rth - j.u_th * f1) / det;
        let dth = (j.u_r * f1 - j.u_rr * f0) / det;
        r -= dr;
        th -= dth;
        if dr.abs() + dth.abs() < 1e-14 {
            return Some((r, th));
        }
    }
    None
}

fn r_e_unchecked(e: f64, p: &Params) -> Result<f64, CmError> {
    let best = thetas()
        .filter_map(|t| inner_root(e, t, p).map(|r| (r, t)))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let Some((r0, t0)) = best else { return Ok(p.r_cut) };
    // The maximum sits where a root pair is born; the grid only gets close to it.
    Ok(match fold(e, r0, t0, p) {
        Some((rf, tf)) if (rf - r0).abs() < 0.1 && (tf - t0).abs() < 0.05 => rf.max(r0),
        _ => r0,
    })
}

/// Smallest `r` beyond which `U(·, θ) = E` has at most one root on every ray.
pub fn compute_r_e(e: f64, p: &Params) -> Result<f64, CmError> {
    let lv = energy_levels(p)?;
    if !(0.0..=lv.e1_tilde).contains(&e) {
        return Err(regime_error(e, MapKind::Extended, &lv));
    }
    r_e_unchecked(e, p)
}

const PINCH_TOL: f64 = 1e-9;

/// Topology of `{r = r0, H = E}`: a torus when every angle is allowed, pinched when the
/// boundary is only touched, two spheres when some angle is forbidden.
pub fn classify_fixed_r_surface(r0: f64, e: f64, p: &Params) -> Result<ShellTopology, CmError> {
    if r0 < p.r_cut {
        return Err(ModelError::BelowCutoff { r: r0, r_cut: p.r_cut }.into());
    }
    let mut umax = f64::NEG_INFINITY;
    for t in thetas() {
        umax = umax.max(potential_total(r0, t, p)?);
    }
    let tol = PINCH_TOL * e.abs().max(1.0);
    Ok(if umax > e + tol {
        ShellTopology::TwoSpheres
    } else if umax >= e - tol {
        ShellTopology::PinchedTorus
    } else {
        ShellTopology::Torus
    })
}

/// Outermost radius with `max_θ U(r, θ) = E` (the pinched shell), searched on
/// `[r_cut, r_max]`.
pub fn pinch_radius(e: f64, r_max: f64, p: &Params) -> Result<Option<f64>, CmError> {
    let umax = |r: f64| -> Result<f64, CmError> {
        let mut m = f64::NEG_INFINITY;
        for t in thetas().step_by(16) {
            m = m.max(potential_total(r, t, p)?);
        }
        Ok(m.max(potential_total(r, FRAC_PI_2, p)?))
    };
    let n = 2000;
    let mut hi = r_max;
    let mut f_hi = umax(hi)? - e;
    for k in (0..n).rev() {
        let lo = p.r_cut + (r_max - p.r_cut) * k as f64 / n as f64;
        let f_lo = umax(lo)? - e;
        if f_lo * f_hi < 0.0 {
            let (mut a, mut b, fa) = (lo, hi, f_lo);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if (umax(m)? - e) * fa > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        hi = lo;
        f_hi = f_lo;
    }
    Ok(None)
}

/// First `(r, θ)` on the grid where the shell radius fails to increase strictly from the
/// previous radius (only where the shell exists), or `None`.
pub fn shell_monotonicity_violation(map: &CmMap, radii: &[f64], n_theta: usize, p: &Params) -> Result<Option<(f64, f64)>, CmError> {
    for i in 0..=n_theta {
        let th = std::f64::consts::PI * i as f64 / n_theta as f64;
        let mut prev: Option<f64> = None;
        for &r in radii {
            let rho = map.shell_radius_sq(r, th, p)?;
            if let Some(q) = prev {
                if q >= 0.0 && rho <= q {
                    return Ok(Some((r, th)));
                }
            }
            prev = Some(rho);
        }
    }
    Ok(None)
}

/// Smallest even `k ≤ kmax` for which `r^k (E − U)` increases with `r` on every ray over
/// `radii` wherever it is non-negative.
pub fn smallest_monotone_power(e: f64, radii: &[f64], kmax: i32, p: &Params) -> Result<Option<i32>, CmError> {
    'power: for k in (2..=kmax).step_by(2) {
        for t in thetas().step_by(8) {
            let mut prev: Option<f64> = None;
            for &r in radii {
                let rho = r.powi(k) * (e - potential_total(r, t, p)?);
                if prev.is_some_and(|q| q >= 0.0 && rho <= q) {
                    continue 'power;
                }
                prev = Some(rho);
            }
        }
        return Ok(Some(k));
    }
    Ok(None)
}

/// CSV with columns `r, theta, P_r, P_theta, topology` for a set of labelled shells.
pub fn write_shells_csv<W: Write>(shells: &[(f64, ShellTopology, Vec<CMPoint>)], w: W) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["r", "theta", "P_r", "P_theta", "topology"])?;
    for (r, topo, pts) in shells {
        for q in pts {
            out.write_record([r.to_string(), q.theta.to_string(), q.p_r.to_string(), q.p_theta.to_string(), topo.as_str().into()])?;
        }
    }
    out.flush()
}
