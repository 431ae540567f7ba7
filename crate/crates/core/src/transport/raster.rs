//! Residence-time and rotation-number rasters on the `θ = 0` section and on the inner
//! surface chart.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divsurf::inner_ds_chart;
use crate::integrate::{Direction, EventSpec, Propagator, TerminalReason, Tolerances};
use crate::model::PhaseState;
use crate::porbit::{p_theta_on_shell, seed_inner};
use crate::Params;

use super::{TransportError, R_TERMINAL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RasterSection {
    /// Axes `(r, p_r)` at `θ = 0`, `p_θ > 0` solved from the energy.
    ThetaZero,
    /// Axes `(σ, p_σ)` on the outward hemisphere of the inner surface chart.
    InnerDs,
}

/// Cell-centred grid over `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Self {
        Self { x, y, nx, ny }
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let fx = (i as f64 + 0.5) / self.nx as f64;
        let fy = (j as f64 + 0.5) / self.ny as f64;
        (self.x.0 + fx * (self.x.1 - self.x.0), self.y.0 + fy * (self.y.1 - self.y.0))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Done,
    /// Reached `t_max` without dissociating.
    Censored,
    /// Hit the cutoff radius.
    Cutoff,
    /// No point of the section over this cell lies on the energy surface.
    Infeasible,
    Failed,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Done => "done",
            CellStatus::Censored => "censored",
            CellStatus::Cutoff => "cutoff",
            CellStatus::Infeasible => "infeasible",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterCell {
    pub x: f64,
    pub y: f64,
    /// Residence time or rotation number. Censored residence cells carry `t_max`; every
    /// other cell that is not `Done` is `NaN`.
    pub value: f64,
    pub status: CellStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RasterKind {
    Residence,
    Rotation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RasterResult {
    pub kind: RasterKind,
    pub section: RasterSection,
    pub energy: f64,
    pub params: Params,
    pub grid: Grid,
    pub t_max: f64,
    pub tolerances: Tolerances,
    /// Row-major in `x` then `y` (index `j * nx + i`).
    pub cells: Vec<RasterCell>,
    pub wall_seconds: f64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    kind: RasterKind,
    section: RasterSection,
    energy: f64,
    params: &'a Params,
    grid: &'a Grid,
    t_max: f64,
    tolerances: &'a Tolerances,
    r_terminal: f64,
    done: usize,
    censored: usize,
    cutoff: usize,
    infeasible: usize,
    failed: usize,
    wall_seconds: f64,
}

impl RasterResult {
    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }

    pub fn finite_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells.iter().filter(|c| c.status == CellStatus::Done).map(|c| c.value)
    }

    pub fn max_value(&self) -> Option<f64> {
        self.finite_values().reduce(f64::max)
    }

    /// CSV with columns `axis1, axis2, value, censored, status`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["axis1", "axis2", "value", "censored", "status"])?;
        for c in &self.cells {
            let censored = u8::from(c.status == CellStatus::Censored);
            out.write_record([c.x.to_string(), c.y.to_string(), c.value.to_string(), censored.to_string(), c.status.as_str().into()])?;
        }
        out.flush()
    }

    /// JSON metadata: section, grid, censoring time, tolerances and cell tallies.
    pub fn write_sidecar<W: Write>(&self, w: W) -> serde_json::Result<()> {
        let meta = Sidecar {
            kind: self.kind,
            section: self.section,
            energy: self.energy,
            params: &self.params,
            grid: &self.grid,
            t_max: self.t_max,
            tolerances: &self.tolerances,
            r_terminal: R_TERMINAL,
            done: self.count(CellStatus::Done),
            censored: self.count(CellStatus::Censored),
            cutoff: self.count(CellStatus::Cutoff),
            infeasible: self.count(CellStatus::Infeasible),
            failed: self.count(CellStatus::Failed),
            wall_seconds: self.wall_seconds,
        };
        serde_json::to_writer_pretty(w, &meta)
    }
}

type Starter = Box<dyn Fn(f64, f64) -> Option<PhaseState<f64>> + Sync>;

fn starter(section: RasterSection, e: f64, p: &Params) -> Result<Starter, TransportError> {
    let p = *p;
    Ok(match section {
        RasterSection::ThetaZero => Box::new(move |r, pr| {
            if r <= p.r_cut {
                return None;
            }
            let pt = p_theta_on_shell(r, 0.0, pr, e, 1.0, &p)?;
            (pt > 0.0).then(|| PhaseState::new(r, 0.0, pr, pt))
        }),
        RasterSection::InnerDs => {
            let chart = inner_ds_chart(&seed_inner(e, &p)?, &p)?;
            Box::new(move |sigma, ps| chart.outward_point(sigma, ps, &p))
        }
    })
}

/// `(residence time, rotation number)` per cell.
fn sweep(
    section: RasterSection,
    grid: &Grid,
    e: f64,
    t_max: f64,
    tol: Tolerances,
    p: &Params,
) -> Result<Vec<(f64, f64, f64, f64, CellStatus)>, TransportError> {
    let start = starter(section, e, p)?;
    let events = vec![EventSpec::radius(R_TERMINAL, Direction::Increasing).terminal()];
    let prop = Propagator::new(p).tolerances(tol).events(events);
    Ok((0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (x, y) = grid.point(k % grid.nx, k / grid.nx);
            let Some(s0) = start(x, y) else { return (x, y, f64::NAN, f64::NAN, CellStatus::Infeasible) };
            match prop.run(&s0, t_max) {
                Ok(run) => {
                    let tr = &run.trajectory;
                    let status = match tr.terminal_reason {
                        TerminalReason::RTerminal => CellStatus::Done,
                        TerminalReason::Cutoff => CellStatus::Cutoff,
                        _ => CellStatus::Censored,
                    };
                    if status == CellStatus::Done {
                        let rot = (tr.final_state.theta - s0.theta) / std::f64::consts::TAU;
                        (x, y, tr.t_final, rot, status)
                    } else {
                        (x, y, f64::NAN, f64::NAN, status)
                    }
                }
                Err(_) => (x, y, f64::NAN, f64::NAN, CellStatus::Failed),
            }
        })
        .collect())
}

fn raster(
    kind: RasterKind,
    section: RasterSection,
    grid: Grid,
    e: f64,
    t_max: f64,
    tol: Tolerances,
    p: &Params,
) -> Result<RasterResult, TransportError> {
    if grid.is_empty() || !(t_max > 0.0) {
        return Err(TransportError::Invalid("empty grid or non-positive t_max".into()));
    }
    let clock = Instant::now();
    let cells = sweep(section, &grid, e, t_max, tol, p)?
        .into_iter()
        .map(|(x, y, t, rot, status)| RasterCell {
            x,
            y,
            value: match (kind, status) {
                (RasterKind::Residence, CellStatus::Censored) => t_max,
                (RasterKind::Residence, _) => t,
                (RasterKind::Rotation, _) => rot,
            },
            status,
        })
        .collect();
    Ok(RasterResult { kind, section, energy: e, params: *p, grid, t_max, tolerances: tol, cells, wall_seconds: clock.elapsed().as_secs_f64() })
}

/// Time to reach `r = 15` from each cell, censored at `t_max`.
pub fn residence_raster(
    section: RasterSection,
    grid: Grid,
    e: f64,
    t_max: f64,
    tol: Tolerances,
    p: &Params,
) -> Result<RasterResult, TransportError> {
    raster(RasterKind::Residence, section, grid, e, t_max, tol, p)
}

/// `(θ_final − θ₀)/2π` at `r = 15` from each cell.
pub fn rotation_raster(
    section: RasterSection,
    grid: Grid,
    e: f64,
    t_max: f64,
    tol: Tolerances,
    p: &Params,
) -> Result<RasterResult, TransportError> {
    raster(RasterKind::Rotation, section, grid, e, t_max, tol, p)
}
