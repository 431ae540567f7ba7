//! Intersections of manifold branches with dividing surfaces, and the γ sets on the
//! outward middle annulus.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divsurf::DividingSurface;
use crate::integrate::{Direction, EventSpec, Propagator, TerminalReason, Tolerances};
use crate::model::{equations_of_motion, potential_total, PhaseState};
use crate::real::wrap_signed;
use crate::Params;

use super::manifold::{ManifoldBranch, ManifoldKind};
use super::{SurfaceId, Surfaces, TransportError, R_TERMINAL};

/// Which crossing of the surface, counted in forward time along the defining
/// trajectories. `First` is reachable on unstable branches, `Last` on stable ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occurrence {
    First,
    Last,
    /// `n`-th outward crossing (1-based) on an unstable branch.
    Nth(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    pub phase: f64,
    pub theta: f64,
    pub p_theta: f64,
    /// Time from the seed to the crossing (negative on stable branches).
    pub t: f64,
}

/// Ordered by seed phase; `missing` holds the phases whose trajectories never made the
/// requested crossing within the time budget.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionCurve {
    pub points: Vec<SectionPoint>,
    pub missing: Vec<f64>,
    pub exhausted: bool,
}

impl SectionCurve {
    pub fn closed(&self) -> bool {
        self.missing.is_empty() && self.points.len() >= 3
    }

    /// Net winding of the curve in `θ` (in turns) over one loop of seeds.
    pub fn winding(&self) -> i64 {
        let n = self.points.len();
        let total: f64 = (0..n).map(|k| wrap_signed(self.points[(k + 1) % n].theta - self.points[k].theta)).sum();
        (total / std::f64::consts::TAU).round() as i64
    }

    /// CSV with columns `phase, theta, p_theta, t`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["phase", "theta", "p_theta", "t"])?;
        for q in &self.points {
            out.write_record([q.phase.to_string(), q.theta.to_string(), q.p_theta.to_string(), q.t.to_string()])?;
        }
        out.flush()
    }
}

/// Lift of `(θ, p_θ)` onto the outward piece of `ds` (`p_r` from the energy, taking the
/// root with the larger normal rate). `None` if no outward point exists there.
pub fn annulus_point(ds: &DividingSurface, theta: f64, p_theta: f64, p: &Params) -> Option<PhaseState<f64>> {
    let (r, slope) = ds.curve.radius(theta);
    let u = potential_total(r, theta, p).ok()?;
    let mr2 = p.m * r * r;
    let k = ds.energy - u - p_theta * p_theta / (2.0 * p.inertia) - (p_theta - p.lambda).powi(2) / (2.0 * mr2);
    if k < 0.0 {
        return None;
    }
    let s = PhaseState::new(r, theta, (2.0 * p.m * k).sqrt(), p_theta);
    let f = equations_of_motion(&s, p).ok()?;
    let rate = f[0] - slope * f[1];
    (rate > 0.0).then_some(s)
}

/// Crossing of `target` in the requested forward-time direction, or `None`.
fn image(
    seed: &PhaseState<f64>,
    branch_sign: f64,
    target: &std::sync::Arc<DividingSurface>,
    outward: bool,
    occurrence: Occurrence,
    t_max: f64,
    tol: Tolerances,
    p: &Params,
) -> Option<(PhaseState<f64>, f64)> {
    // In backward time the sign of g after a forward-outward crossing is negative.
    let dir = match (outward, branch_sign > 0.0) {
        (true, true) | (false, false) => Direction::Increasing,
        _ => Direction::Decreasing,
    };
    let count = match occurrence {
        Occurrence::Nth(n) => n.max(1),
        _ => 1,
    };
    let events = vec![
        target.event(dir).max_count(count),
        EventSpec::radius(R_TERMINAL, Direction::Increasing).terminal(),
    ];
    let run = Propagator::new(p).tolerances(tol).events(events).run(seed, branch_sign * t_max).ok()?;
    if run.trajectory.terminal_reason != TerminalReason::EventQuota {
        return None;
    }
    let rec = run.log.records.iter().rev().find(|r| r.event == 0 && !r.grazing)?;
    Some((rec.state, rec.t))
}

/// Section of `branch` with the `outward` (or inward) piece of surface `target`, refined
/// by inserting seeds between neighbours whose images are more than `gap` apart in
/// `(θ, p_θ / p_scale)`, with `p_scale` the largest `|p_θ|` among the first images.
#[allow(clippy::too_many_arguments)]
pub fn manifold_section(
    branch: &mut ManifoldBranch,
    surfaces: &Surfaces,
    target: SurfaceId,
    outward: bool,
    occurrence: Occurrence,
    gap: f64,
    t_max: f64,
    tol: Tolerances,
    p: &Params,
) -> Result<SectionCurve, TransportError> {
    let ds = surfaces.get(target).ok_or(TransportError::MissingSurface(target.as_str()))?.clone();
    match (branch.kind, occurrence) {
        (ManifoldKind::Unstable, Occurrence::First | Occurrence::Nth(_)) | (ManifoldKind::Stable, Occurrence::Last) => {}
        _ => return Err(TransportError::Invalid("occurrence not reachable from this branch".into())),
    }
    let sign = branch.time_sign();
    let run = |s: &PhaseState<f64>| image(s, sign, &ds, outward, occurrence, t_max, tol, p);

    let mut items: Vec<(f64, Option<(PhaseState<f64>, f64)>)> =
        branch.seeds.par_iter().map(|s| (s.phase, run(&s.state))).collect();
    let p_scale = items
        .iter()
        .filter_map(|(_, x)| x.map(|(s, _)| s.p_theta.abs()))
        .fold(0.0, f64::max)
        .max(1e-3);
    let dist = |a: &PhaseState<f64>, b: &PhaseState<f64>| {
        wrap_signed(a.theta - b.theta).hypot((a.p_theta - b.p_theta) / p_scale)
    };
    const MIN_DPHASE: f64 = 1e-9;
    loop {
        let n = items.len();
        let mut mids = Vec::new();
        for k in 0..n {
            let (pa, a) = &items[k];
            let (pb, b) = &items[(k + 1) % n];
            let pb = if k + 1 == n { pb + 1.0 } else { *pb };
            if pb - pa < MIN_DPHASE {
                continue;
            }
            let split = match (a, b) {
                (Some((x, _)), Some((y, _))) => dist(x, y) > gap,
                (None, None) => false,
                _ => pb - pa > 1e-6,
            };
            if split {
                mids.push(0.5 * (pa + pb));
            }
        }
        if mids.is_empty() {
            break;
        }
        if mids.len() > branch.budget {
            branch.exhausted = true;
            mids.truncate(branch.budget);
        }
        if mids.is_empty() {
            break;
        }
        branch.budget -= mids.len();
        let new: Vec<_> = mids
            .par_iter()
            .map(|&phi| -> Result<_, TransportError> {
                let seed = branch.seed_at(phi, p)?;
                Ok((seed, run(&seed.state)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (seed, img) in new {
            branch.seeds.push(seed);
            items.push((seed.phase, img));
        }
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        branch.seeds.sort_by(|a, b| a.phase.total_cmp(&b.phase));
        if branch.exhausted {
            break;
        }
    }
    let mut curve = SectionCurve { points: Vec::new(), missing: Vec::new(), exhausted: branch.exhausted };
    for (phase, img) in items {
        match img {
            Some((s, t)) => curve.points.push(SectionPoint { phase, theta: s.theta, p_theta: s.p_theta, t }),
            None => curve.missing.push(phase),
        }
    }
    Ok(curve)
}

/// A region of the `(θ, p_θ)` annulus bounded by closed curves. Membership is the
/// even-odd rule along the ray of increasing `p_θ` at fixed `θ (mod 2π)`: inside a
/// contractible loop, or between two loops that each wrap once around the annulus.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaSet {
    pub label: String,
    pub curves: Vec<SectionCurve>,
}

impl GammaSet {
    pub fn new(label: impl Into<String>, curves: Vec<SectionCurve>) -> Self {
        Self { label: label.into(), curves }
    }

    /// Membership is only defined when every boundary curve closed.
    pub fn usable(&self) -> bool {
        self.curves.iter().all(SectionCurve::closed)
    }

    pub fn contains(&self, theta: f64, p_theta: f64) -> Option<bool> {
        if !self.usable() {
            return None;
        }
        let mut odd = false;
        for c in &self.curves {
            let pts = &c.points;
            let n = pts.len();
            for k in 0..n {
                let (a, b) = (&pts[k], &pts[(k + 1) % n]);
                let delta = wrap_signed(b.theta - a.theta);
                let d = wrap_signed(theta - a.theta);
                let spans = (0.0 <= d && d < delta) || (delta <= d && d < 0.0);
                if !spans || delta == 0.0 {
                    continue;
                }
                let f = d / delta;
                if a.p_theta + f * (b.p_theta - a.p_theta) > p_theta {
                    odd = !odd;
                }
            }
        }
        Some(odd)
    }

    /// Range of `p_θ` over all boundary points.
    pub fn p_theta_range(&self) -> (f64, f64) {
        let it = self.curves.iter().flat_map(|c| c.points.iter().map(|q| q.p_theta));
        it.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}
