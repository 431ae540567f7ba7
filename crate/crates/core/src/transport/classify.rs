//! Trajectory classes from signed dividing-surface crossings.

use serde::{Deserialize, Serialize};

use crate::integrate::{EventLog, Propagator, TerminalReason, Tolerances};
use crate::model::{equations_of_motion, PhaseState};
use crate::Params;

use super::{region_of, Region, SurfaceId, Surfaces, TransportError, BOUNDARY_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryClass {
    Direct,
    Roaming,
    Isomerising,
    NondissociativeRoaming,
    Trapped,
    Censored,
}

impl TrajectoryClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TrajectoryClass::Direct => "direct",
            TrajectoryClass::Roaming => "roaming",
            TrajectoryClass::Isomerising => "isomerising",
            TrajectoryClass::NondissociativeRoaming => "nondissociative_roaming",
            TrajectoryClass::Trapped => "trapped",
            TrajectoryClass::Censored => "censored",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossings {
    pub outward: usize,
    pub inward: usize,
}

impl Crossings {
    pub fn total(&self) -> usize {
        self.outward + self.inward
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Classification {
    pub class: TrajectoryClass,
    pub inner_plus: Crossings,
    pub inner_minus: Crossings,
    pub middle: Crossings,
    pub outer: Crossings,
    /// The start lies outside the middle surface (or on it, moving out); it then counts
    /// as one outward middle crossing.
    pub started_outside_middle: bool,
    /// Well the trajectory started in, or first entered.
    pub origin: Option<Region>,
    pub dissociated: bool,
    pub terminal: TerminalReason,
    pub t_final: f64,
    /// A tangency was met; the counts may be off by a pair.
    pub grazing: bool,
    /// Event index `k` refers to surface `surfaces[k]`; the last index is `r = 15`.
    pub surfaces: Vec<SurfaceId>,
    pub log: EventLog<f64>,
}

impl Classification {
    pub fn middle_outward_effective(&self) -> usize {
        self.middle.outward + usize::from(self.started_outside_middle)
    }

    pub fn crossings(&self, id: SurfaceId) -> Crossings {
        match id {
            SurfaceId::InnerPlus => self.inner_plus,
            SurfaceId::InnerMinus => self.inner_minus,
            SurfaceId::Middle => self.middle,
            SurfaceId::Outer => self.outer,
        }
    }
}

fn well(id: SurfaceId) -> Option<Region> {
    match id {
        SurfaceId::InnerPlus => Some(Region::B1Plus),
        SurfaceId::InnerMinus => Some(Region::B1Minus),
        _ => None,
    }
}

/// Integrates `start` until `r = 15`, the cutoff, or `t_max`, and labels it. In order of
/// precedence: cutoff breach is trapped; entering the well other than the origin is
/// isomerising; a dissociating trajectory is direct with one outward middle crossing and
/// roaming with two or more; otherwise at least three middle crossings make it
/// nondissociative roaming, and the rest are censored.
pub fn classify_trajectory(
    start: &PhaseState<f64>,
    surfaces: &Surfaces,
    t_max: f64,
    tol: Tolerances,
    p: &Params,
) -> Result<Classification, TransportError> {
    let (events, ids) = surfaces.events();
    let run = Propagator::new(p).tolerances(tol).events(events).run(start, t_max)?;
    let origin0 = match region_of(start, surfaces, p)? {
        r @ (Region::B1Plus | Region::B1Minus) => Some(r),
        _ => None,
    };
    let started_outside_middle = match &surfaces.middle {
        Some(ds) => {
            let g = ds.value(start);
            if g.abs() < BOUNDARY_TOL {
                ds.normal_rate(start, &equations_of_motion(start, p)?) > 0.0
            } else {
                g > 0.0
            }
        }
        None => false,
    };

    let mut counts = [Crossings::default(); 4];
    let mut origin = origin0;
    let mut isomerised = false;
    let mut grazing = false;
    for rec in &run.log.records {
        let Some(&id) = ids.get(rec.event) else { continue };
        if rec.grazing || rec.sign == 0 {
            grazing = true;
            continue;
        }
        let c = &mut counts[id as usize];
        if rec.sign > 0 {
            c.outward += 1;
        } else {
            c.inward += 1;
            if let Some(w) = well(id) {
                match origin {
                    None => origin = Some(w),
                    Some(o) if o != w => isomerised = true,
                    _ => {}
                }
            }
        }
    }
    let reason = run.trajectory.terminal_reason;
    let dissociated = reason == TerminalReason::RTerminal;
    let [inner_plus, inner_minus, middle, outer] = counts;
    let mid_out = middle.outward + usize::from(started_outside_middle);
    let class = if reason == TerminalReason::Cutoff {
        TrajectoryClass::Trapped
    } else if isomerised {
        TrajectoryClass::Isomerising
    } else if dissociated {
        if mid_out >= 2 {
            TrajectoryClass::Roaming
        } else {
            TrajectoryClass::Direct
        }
    } else if middle.total() + usize::from(started_outside_middle) >= 3 {
        TrajectoryClass::NondissociativeRoaming
    } else {
        TrajectoryClass::Censored
    };
    Ok(Classification {
        class,
        inner_plus,
        inner_minus,
        middle,
        outer,
        started_outside_middle,
        origin,
        dissociated,
        terminal: reason,
        t_final: run.trajectory.t_final,
        grazing,
        surfaces: ids,
        log: run.log,
    })
}
