//! Threshold crossings along a continued family.

use serde::{Deserialize, Serialize};

use crate::Params;

use super::continuation::{correct, orbit_at, Family};
use super::{FamilyTag, PeriodicOrbit, PorbitError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BifurcationKind {
    /// Fold in `E` along the branch.
    SaddleCentre,
    /// `R` crosses 0.
    StabilityChange,
    /// `R` crosses 1, or the half-period residue of a `π`-symmetric orbit does.
    PeriodDoubling,
    /// The family meets another one.
    Collision,
}

impl BifurcationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BifurcationKind::SaddleCentre => "saddle_centre",
            BifurcationKind::StabilityChange => "stability_change",
            BifurcationKind::PeriodDoubling => "period_doubling",
            BifurcationKind::Collision => "collision",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bifurcation {
    pub energy: f64,
    pub kind: BifurcationKind,
    /// Energies of the final bisection bracket.
    pub bracket: (f64, f64),
    /// The bracket could not be narrowed to `1e-4`.
    pub wide: bool,
    /// Detected on the half-period (symmetry-reduced) residue.
    pub reduced: bool,
    pub partner: Option<FamilyTag>,
}

const E_TOL: f64 = 1e-4;

#[derive(Clone, Copy)]
enum Probe {
    Fold,
    Residue(f64),
    Reduced(f64),
}

impl Probe {
    fn value(self, tangent_e: f64, orbit: &PeriodicOrbit) -> Option<f64> {
        match self {
            Probe::Fold => Some(tangent_e),
            Probe::Residue(c) => Some(orbit.residue - c),
            Probe::Reduced(c) => orbit.reduced_residue.map(|r| r - c),
        }
    }
}

/// Scans consecutive orbits for sign changes of `dE/ds`, `R`, `R − 1` and, for
/// `π`-symmetric orbits, `R_½ − 1`; each is bisected along the arclength until the
/// energy bracket is below `1e-4`. Needs at least three orbits.
pub fn detect_bifurcations(family: &Family, p: &Params) -> Vec<Bifurcation> {
    let nodes = &family.nodes;
    let orbits = &family.orbits;
    if orbits.len() < 3 {
        return Vec::new();
    }
    let n = family.section().unknowns();
    let mut out = Vec::new();
    for i in 0..orbits.len() - 1 {
        let (a, b) = (&orbits[i], &orbits[i + 1]);
        let (ta, tb) = (nodes[i].tangent[n], nodes[i + 1].tangent[n]);
        let fold = ta * tb < 0.0;
        let probes = [
            (Probe::Fold, BifurcationKind::SaddleCentre, false),
            (Probe::Residue(0.0), BifurcationKind::StabilityChange, false),
            (Probe::Residue(1.0), BifurcationKind::PeriodDoubling, false),
            (Probe::Reduced(1.0), BifurcationKind::PeriodDoubling, true),
        ];
        for (probe, kind, reduced) in probes {
            let (Some(qa), Some(qb)) = (probe.value(ta, a), probe.value(tb, b)) else { continue };
            if qa * qb >= 0.0 {
                continue;
            }
            // R vanishes at every saddle-centre; that crossing is the fold itself.
            if fold && kind == BifurcationKind::StabilityChange {
                continue;
            }
            let (energy, bracket) = bisect(family, i, probe, qa, p);
            out.push(Bifurcation {
                energy,
                kind,
                bracket,
                wide: (bracket.0 - bracket.1).abs() > E_TOL,
                reduced,
                partner: None,
            });
        }
    }
    out.sort_by(|x, y| x.energy.total_cmp(&y.energy));
    out
}

fn bisect(family: &Family, i: usize, probe: Probe, qa: f64, p: &Params) -> (f64, (f64, f64)) {
    let section = family.section();
    let sign = family.sign();
    let n = section.unknowns();
    let (na, nb) = (&family.nodes[i], &family.nodes[i + 1]);
    let (mut sa, mut sb) = (na.s, nb.s);
    let (mut ea, mut eb) = (na.z[n], nb.z[n]);
    for _ in 0..60 {
        if (ea - eb).abs() < E_TOL && (sb - sa) < 1e-3 {
            break;
        }
        let sm = 0.5 * (sa + sb);
        let pred: Vec<f64> = na.z.iter().zip(&na.tangent).map(|(z, t)| z + (sm - na.s) * t).collect();
        let eval = || -> Result<(f64, f64), PorbitError> {
            let (z, t, time, _) = correct(section, sign, &pred, &na.tangent, p)?;
            let orbit = orbit_at(section, sign, &z, time, p)?;
            let q = probe.value(t[n], &orbit).ok_or(PorbitError::SingularJacobian)?;
            Ok((q, z[n]))
        };
        match eval() {
            Ok((q, e)) => {
                if q * qa > 0.0 {
                    sa = sm;
                    ea = e;
                } else {
                    sb = sm;
                    eb = e;
                }
            }
            Err(_) => break,
        }
    }
    (0.5 * (ea + eb), (ea, eb))
}

/// Points where a family folds or ends, matched against the other families: a match
/// within `tol` in `(r, p_r)` at the same energy is recorded as a collision on both.
pub fn detect_collisions(families: &mut [Family], tol: f64) {
    let mut found: Vec<(usize, Bifurcation)> = Vec::new();
    let mut record = |k: usize, bif: Bifurcation| {
        // Points kept past a fold lie on the partner family; one record per pair and fold.
        if !found.iter().any(|(j, x)| *j == k && x.partner == bif.partner && (x.energy - bif.energy).abs() < 0.25) {
            found.push((k, bif));
        }
    };
    for a in 0..families.len() {
        let fa = &families[a];
        // (reported energy, orbit) pairs: folds first so they win over nearby endpoints.
        let mut contacts: Vec<(f64, &PeriodicOrbit)> = Vec::new();
        for b in fa.bifurcations.iter().filter(|b| b.kind == BifurcationKind::SaddleCentre) {
            if let Some(o) = fa.orbits.iter().min_by(|x, y| (x.energy - b.energy).abs().total_cmp(&(y.energy - b.energy).abs())) {
                contacts.push((b.energy, o));
            }
        }
        if let (Some(first), Some(last)) = (fa.orbits.first(), fa.orbits.last()) {
            contacts.push((first.energy, first));
            contacts.push((last.energy, last));
        }
        for (b, fb) in families.iter().enumerate() {
            if a == b || fa.tag.kind == fb.tag.kind || fa.sign() != fb.sign() {
                continue;
            }
            for (e, c) in &contacts {
                let near = |r: f64, pr: f64| (r - c.point.r).abs() + (pr - c.point.p_r).abs();
                let hit = interpolate(fb, c.energy).into_iter().any(|(r, pr)| near(r, pr) < tol)
                    || fb.orbits.iter().any(|o| (o.energy - c.energy).abs() + near(o.point.r, o.point.p_r) < tol);
                if hit {
                    let bif = Bifurcation {
                        energy: *e,
                        kind: BifurcationKind::Collision,
                        bracket: (*e, *e),
                        wide: false,
                        reduced: false,
                        partner: Some(fb.tag),
                    };
                    record(b, Bifurcation { partner: Some(fa.tag), ..bif.clone() });
                    record(a, bif);
                }
            }
        }
    }
    for (k, bif) in found {
        families[k].bifurcations.push(bif);
        families[k].bifurcations.sort_by(|x, y| x.energy.total_cmp(&y.energy));
    }
}

/// Section points of `family` at energy `e`, linearly interpolated between every pair of
/// adjacent orbits bracketing `e`.
fn interpolate(family: &Family, e: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for w in family.orbits.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (lo, hi) = if a.energy < b.energy { (a, b) } else { (b, a) };
        if e < lo.energy - 1e-3 || e > hi.energy + 1e-3 {
            continue;
        }
        let f = if hi.energy > lo.energy { ((e - lo.energy) / (hi.energy - lo.energy)).clamp(0.0, 1.0) } else { 0.5 };
        let r = lo.point.r + f * (hi.point.r - lo.point.r);
        let pr = lo.point.p_r + f * (hi.point.p_r - lo.point.p_r);
        out.push((r, pr));
    }
    out
}
