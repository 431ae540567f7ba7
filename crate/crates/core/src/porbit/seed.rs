//! Starting orbits for the named families.

use std::f64::consts::FRAC_PI_2;

use crate::integrate::Propagator;
use crate::model::{find_critical_points, relative_equilibrium_at_energy, CriticalLabel, PhaseState};
use crate::real::wrap_signed;
use crate::Params;

use super::shoot::{shoot, shot_tolerances};
use super::{refine_orbit, FamilyKind, FamilyTag, PeriodicOrbit, PorbitError, Section, Sign};

/// Refined orbits of a one-unknown section (`Brake` or `Rotating`) found from the sign
/// changes of the residual on `n` radii in `r_range`, ordered by `r`.
pub fn scan_section(e: f64, section: Section, r_range: (f64, f64), n: usize, p: &Params) -> Vec<PeriodicOrbit> {
    assert!(section.unknowns() == 1, "scan_section needs a one-unknown section");
    let mut out: Vec<PeriodicOrbit> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=n {
        let r = r_range.0 + (r_range.1 - r_range.0) * k as f64 / n as f64;
        let f = shoot(section, &[r], e, 1.0, p).ok().map(|s| s.f[0]);
        if let (Some((r0, f0)), Some(f1)) = (prev, f) {
            if f0 * f1 < 0.0 {
                let guess = PhaseState::new(0.5 * (r0 + r), 0.0, 0.0, 1.0);
                if let Ok(o) = refine_orbit(&guess, e, section, p) {
                    if o.point.r >= r0 - 1e-9 && o.point.r <= r + 1e-9 && !out.iter().any(|x| (x.point.r - o.point.r).abs() < 1e-8) {
                        out.push(o);
                    }
                }
            }
        }
        prev = f.map(|f| (r, f));
    }
    out
}

fn q1_radius(p: &Params) -> f64 {
    find_critical_points(p).iter().find(|c| c.label == CriticalLabel::Q1Plus).map_or(3.5, |c| c.r)
}

/// Energy at which the families are identified before being tracked to other energies.
pub const ANCHOR_ENERGY: f64 = 2.0;

/// Follows `orbit` in energy to `e` by natural-parameter steps with linear extrapolation
/// of the section unknowns.
pub fn track(orbit: &PeriodicOrbit, e: f64, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    let tag = orbit.family;
    let mut cur = orbit.clone();
    let mut prev: Option<PeriodicOrbit> = None;
    let mut de = 0.1f64.copysign(e - cur.energy);
    // An asymmetric orbit must not slide onto the symmetric family it bifurcates from.
    let asymmetric = matches!(orbit.section, Section::Return { .. }) && orbit.point.p_r.abs() > 1e-6;
    while (e - cur.energy).abs() > 1e-12 {
        if de.abs() < 1e-6 {
            return Err(PorbitError::NoSeed(format!("{} cannot be followed past E = {:.6}", tag.label(), cur.energy)));
        }
        let step = if (e - cur.energy).abs() < de.abs() { e - cur.energy } else { de };
        let e1 = cur.energy + step;
        let mut guess = cur.point;
        if let Some(q) = &prev {
            let k = step / (cur.energy - q.energy);
            guess.r += k * (cur.point.r - q.point.r);
            guess.p_r += k * (cur.point.p_r - q.point.p_r);
        }
        match refine_orbit(&guess, e1, cur.section, p) {
            Ok(o) if (o.point.r - cur.point.r).abs() < 0.5 * cur.point.r.max(1.0) * step.abs().sqrt().max(0.05)
                && (o.period - cur.period).abs() < 0.25 * cur.period
                && (!asymmetric || o.point.p_r * cur.point.p_r > 0.0 && o.point.p_r.abs() > 1e-6) =>
            {
                prev = Some(std::mem::replace(&mut cur, o));
                de = (de * 1.5).clamp(-0.25, 0.25);
            }
            _ => de *= 0.5,
        }
    }
    Ok(cur.with_family(tag))
}

fn at_energy(anchor: PeriodicOrbit, e: f64, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    if (e - anchor.energy).abs() < 1e-12 {
        Ok(anchor)
    } else {
        track(&anchor, e, p)
    }
}

/// `Γⁱ₊`: at the anchor energy, the outermost brake orbit crossing `θ = 0` inside the `q1`
/// saddle radius whose turning points stay in the well (`|θ| < π/2`); then tracked to `e`.
pub fn seed_inner(e: f64, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    at_energy(inner_anchor(p)?, e, p)
}

fn inner_anchor(p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    let e = ANCHOR_ENERGY;
    let hi = q1_radius(p);
    let confined = |o: &PeriodicOrbit| {
        Propagator::new(p)
            .tolerances(shot_tolerances())
            .run(&o.point, 0.25 * o.period)
            .is_ok_and(|run| wrap_signed(run.trajectory.final_state.theta).abs() < FRAC_PI_2)
    };
    scan_section(e, Section::Brake, (p.r_cut + 1e-3, hi), 400, p)
        .into_iter()
        .filter(confined)
        .last()
        .map(|o| o.with_family(FamilyTag::new(FamilyKind::Inner, Sign::Plus)))
        .ok_or_else(|| PorbitError::NoSeed(format!("no brake orbit inside r = {hi:.4} at E = {e}")))
}

/// `Γᵒ₊`: Newton from the far-field relative equilibrium at energy `e > 0`.
pub fn seed_outer(e: f64, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    let re = relative_equilibrium_at_energy(e, p)?;
    let guess = PhaseState::new(re.r, 0.0, 0.0, 1.0);
    refine_orbit(&guess, e, Section::Rotating, p)
        .or_else(|_| {
            let w = 0.2 * re.r;
            scan_section(e, Section::Rotating, (re.r - w, re.r + w), 200, p)
                .into_iter()
                .min_by(|a, b| (a.point.r - re.r).abs().total_cmp(&(b.point.r - re.r).abs()))
                .ok_or_else(|| PorbitError::NoSeed(format!("no rotating orbit near r = {:.4}", re.r)))
        })
        .map(|o| o.with_family(FamilyTag::new(FamilyKind::Outer, Sign::Plus)))
}

/// `Γᵃ₊`: at the anchor energy, the outermost rotating orbit between the `Γⁱ` and `Γᵒ`
/// radii; then tracked to `e`.
pub fn seed_middle(e: f64, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    at_energy(middle_anchor(p)?, e, p)
}

fn middle_anchor(p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    let e = ANCHOR_ENERGY;
    let inner = inner_anchor(p)?;
    let outer = seed_outer(e, p)?;
    scan_section(e, Section::Rotating, (inner.point.r, outer.point.r), 400, p)
        .into_iter()
        .filter(|o| o.point.r < outer.point.r - 1e-6)
        .last()
        .map(|o| o.with_family(FamilyTag::new(FamilyKind::Middle, Sign::Plus)))
        .ok_or_else(|| PorbitError::NoSeed(format!("no rotating orbit between Γi and Γo at E = {e}")))
}

/// `Γᵇ₊`: the asymmetric orbit of the first-return map next to `Γᵃ` (representative with
/// `p_r < 0` on `θ = 0`), found at the anchor energy and tracked to `e`. Exists between its
/// fold near `E = 0` and the pitchfork on `Γᵃ`.
pub fn seed_b(e: f64, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    at_energy(b_anchor(p)?, e, p)
}

fn b_anchor(p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    let e = ANCHOR_ENERGY;
    let a = middle_anchor(p)?;
    let section = Section::Return { returns: 1 };
    let mut best: Option<PeriodicOrbit> = None;
    for i in 0..=12 {
        let r = a.point.r + 0.05 * i as f64;
        for j in 1..=8 {
            let guess = PhaseState::new(r, 0.0, -0.1 * j as f64, 1.0);
            let Ok(o) = refine_orbit(&guess, e, section, p) else { continue };
            if o.point.p_r < -1e-6 && o.closure < 1e-8 {
                let better = best.as_ref().map_or(true, |b| (o.point.r - a.point.r).abs() < (b.point.r - a.point.r).abs());
                if better {
                    best = Some(o);
                }
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.map(|o| o.with_family(FamilyTag::new(FamilyKind::B, Sign::Plus)))
        .ok_or_else(|| PorbitError::NoSeed(format!("no asymmetric orbit next to Γa at E = {e}")))
}
