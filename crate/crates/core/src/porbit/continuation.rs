//! Pseudo-arclength continuation in `(section unknowns, E)`.

use serde::{Deserialize, Serialize};

use crate::Params;

use super::bifurcation::{detect_bifurcations, Bifurcation};
use super::shoot::{section_point, shoot};
use super::{evaluate, norm, FamilyTag, PeriodicOrbit, PorbitError, Section};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub ds_init: f64,
    /// Below this the continuation is declared stalled.
    pub ds_min: f64,
    pub ds_max: f64,
    pub max_steps: usize,
    /// Folds passed before a branch is closed (a few points past the last one are kept).
    pub max_folds: usize,
    /// A step is rejected when the residue moves by more than this times `max(1, |R|)`.
    pub residue_jump: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { ds_init: 0.02, ds_min: 1e-4, ds_max: 0.1, max_steps: 4000, max_folds: 1, residue_jump: 0.25 }
    }
}

/// One point of the continuation curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// `(u…, E)`.
    pub z: Vec<f64>,
    /// Unit tangent oriented along increasing arclength.
    pub tangent: Vec<f64>,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub tag: FamilyTag,
    pub orbits: Vec<PeriodicOrbit>,
    pub nodes: Vec<Node>,
    pub bifurcations: Vec<Bifurcation>,
    /// Why a branch stopped before leaving the energy range, if it did.
    pub stall: Option<String>,
}

impl Family {
    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.orbits.iter().map(|o| o.energy)
    }

    pub(crate) fn section(&self) -> Section {
        self.orbits[0].section
    }

    pub(crate) fn sign(&self) -> f64 {
        self.orbits[0].sign()
    }
}

/// Null vector of an `n × (n + 1)` Jacobian, `n ∈ {1, 2}`.
pub(crate) fn null_vector(jac: &[Vec<f64>]) -> Vec<f64> {
    let v = match jac.len() {
        1 => vec![-jac[0][1], jac[0][0]],
        2 => {
            let (a, b) = (&jac[0], &jac[1]);
            vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
        }
        _ => unreachable!("at most two section unknowns"),
    };
    let n = norm(&v);
    v.iter().map(|x| x / n).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Corrector onto the curve in the hyperplane `t·(z − z_pred) = 0`. Returns the point,
/// its oriented tangent, the shooting time and the iteration count.
pub(crate) fn correct(
    section: Section,
    sign: f64,
    z_pred: &[f64],
    t: &[f64],
    p: &Params,
) -> Result<(Vec<f64>, Vec<f64>, f64, usize), PorbitError> {
    let n = section.unknowns();
    let mut z = z_pred.to_vec();
    for it in 0..12 {
        let shot = shoot(section, &z[..n], z[n], sign, p)?;
        let mut g = shot.f.clone();
        g.push(dot(t, &z.iter().zip(z_pred).map(|(a, b)| a - b).collect::<Vec<_>>()));
        let mut jac = shot.jac.clone();
        jac.push(t.to_vec());
        let a = nalgebra::DMatrix::from_fn(n + 1, n + 1, |i, k| jac[i][k]);
        let dz = a.lu().solve(&nalgebra::DVector::from_vec(g)).ok_or(PorbitError::SingularJacobian)?;
        for k in 0..=n {
            z[k] -= dz[k];
        }
        if norm(&shot.f) < 1e-10 && dz.norm() < 1e-9 {
            let shot = shoot(section, &z[..n], z[n], sign, p)?;
            let mut tan = null_vector(&shot.jac);
            if dot(&tan, t) < 0.0 {
                tan.iter_mut().for_each(|x| *x = -*x);
            }
            return Ok((z, tan, shot.time, it + 1));
        }
    }
    Err(PorbitError::NoConvergence { iterations: 12, residual: f64::NAN })
}

/// Orbit at a corrected continuation point.
pub(crate) fn orbit_at(section: Section, sign: f64, z: &[f64], time: f64, p: &Params) -> Result<PeriodicOrbit, PorbitError> {
    let n = section.unknowns();
    let x0 = section_point(section, &z[..n], z[n], sign, p).ok_or(PorbitError::OffShell { e: z[n] })?;
    evaluate(x0, time * section.period_factor(), section, p)
}

struct Branch {
    nodes: Vec<(Node, PeriodicOrbit)>,
    stall: Option<String>,
}

fn branch(
    start: &PeriodicOrbit,
    start_tangent: &[f64],
    e_range: (f64, f64),
    ctl: &StepControl,
    p: &Params,
) -> Branch {
    let section = start.section;
    let sign = start.sign();
    let n = section.unknowns();
    let mut z = start.unknowns();
    z.push(start.energy);
    let mut t = start_tangent.to_vec();
    let mut s = 0.0;
    let mut ds = ctl.ds_init;
    let mut prev = start.clone();
    let mut out = Vec::new();
    let mut folds = 0;
    let mut after_fold = 0;
    let asymmetric = start.point.p_r.abs() > 1e-6;
    for _ in 0..ctl.max_steps {
        if ds < ctl.ds_min {
            return Branch { nodes: out, stall: Some(format!("step size below {} at E = {:.6}", ctl.ds_min, z[n])) };
        }
        let pred: Vec<f64> = z.iter().zip(&t).map(|(a, b)| a + ds * b).collect();
        let attempt = correct(section, sign, &pred, &t, p).and_then(|(z1, t1, time, iters)| {
            let orbit = orbit_at(section, sign, &z1, time, p)?;
            Ok((z1, t1, orbit, iters))
        });
        let (z1, t1, orbit, iters) = match attempt {
            Ok(v) => v,
            Err(_) => {
                ds *= 0.5;
                continue;
            }
        };
        let jump = (orbit.residue - prev.residue).abs() > ctl.residue_jump * prev.residue.abs().max(1.0);
        let period_jump = (orbit.period - prev.period).abs() > 0.25 * prev.period;
        let step_len = norm(&z1.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>());
        if (jump || period_jump || step_len > 2.0 * ds) && ds > 2.0 * ctl.ds_min {
            ds *= 0.5;
            continue;
        }
        let e1 = z1[n];
        if e1 < e_range.0 || e1 > e_range.1 {
            return Branch { nodes: out, stall: None };
        }
        // A symmetric orbit reached from an asymmetric branch: the branch ends in a pitchfork.
        if let (Section::Return { .. }, true) = (section, asymmetric) {
            if z[1] * z1[1] < 0.0 || z1[1].abs() < 1e-9 {
                return Branch { nodes: out, stall: Some(format!("branch meets a reversible-symmetric orbit near E = {e1:.6}")) };
            }
        }
        if t[n] * t1[n] < 0.0 {
            folds += 1;
        }
        s += step_len;
        out.push((Node { z: z1.clone(), tangent: t1.clone(), s }, orbit.clone()));
        if folds >= ctl.max_folds && folds > 0 {
            after_fold += 1;
            if after_fold > 3 {
                return Branch { nodes: out, stall: None };
            }
        }
        z = z1;
        t = t1;
        prev = orbit;
        if iters <= 3 {
            ds = (ds * 1.5).min(ctl.ds_max);
        }
    }
    Branch { nodes: out, stall: Some("step budget exhausted".into()) }
}

/// Continues `start` in both directions until the energy leaves `e_range`, the fold budget
/// is used up, or the step size underflows. Orbits are ordered by arclength.
pub fn continue_family(start: &PeriodicOrbit, e_range: (f64, f64), ctl: &StepControl, p: &Params) -> Result<Family, PorbitError> {
    let section = start.section;
    let n = section.unknowns();
    let mut z0 = start.unknowns();
    z0.push(start.energy);
    let shot = shoot(section, &z0[..n], z0[n], start.sign(), p)?;
    let mut t0 = null_vector(&shot.jac);
    if t0[n] < 0.0 {
        t0.iter_mut().for_each(|x| *x = -*x);
    }
    let up = branch(start, &t0, e_range, ctl, p);
    let back: Vec<f64> = t0.iter().map(|x| -x).collect();
    let down = branch(start, &back, e_range, ctl, p);

    let mut nodes = Vec::new();
    let mut orbits = Vec::new();
    for (node, orbit) in down.nodes.into_iter().rev() {
        nodes.push(Node { z: node.z, tangent: node.tangent.iter().map(|x| -x).collect(), s: -node.s });
        orbits.push(orbit);
    }
    nodes.push(Node { z: z0, tangent: t0, s: 0.0 });
    orbits.push(start.clone());
    for (node, orbit) in up.nodes {
        nodes.push(node);
        orbits.push(orbit);
    }
    let s_min = nodes[0].s;
    nodes.iter_mut().for_each(|nd| nd.s -= s_min);
    for o in &mut orbits {
        o.family = start.family;
    }
    let stall = match (down.stall, up.stall) {
        (None, None) => None,
        (a, b) => Some([a, b].into_iter().flatten().collect::<Vec<_>>().join("; ")),
    };
    let mut family = Family { tag: start.family, orbits, nodes, bifurcations: Vec::new(), stall };
    family.bifurcations = detect_bifurcations(&family, p);
    Ok(family)
}
