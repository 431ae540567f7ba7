//! Transport between the wells and the dissociated region: regions, rasters, invariant
//! manifolds, γ sets on the middle surface, trajectory classes and the return map.

mod classify;
mod gamma;
mod manifold;
mod raster;
mod returnmap;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divsurf::{build_ds, inner_ds_chart, DividingSurface, DsError, InnerDSChart};
use crate::integrate::{Direction, EventSpec, IntegrateError};
use crate::model::{equations_of_motion, ModelError, PhaseState};
use crate::porbit::{seed_inner, seed_middle, seed_outer, PeriodicOrbit, PorbitError};
use crate::real::wrap_signed;
use crate::Params;

pub use classify::{classify_trajectory, Classification, Crossings, TrajectoryClass};
pub use gamma::{annulus_point, manifold_section, GammaSet, Occurrence, SectionCurve, SectionPoint};
pub use manifold::{
    grow_manifold, heteroclinic_threshold, outer_stable_reaches_inner, ManifoldBranch, ManifoldKind, Seed, Side, DEFAULT_EPSILON,
};
pub use raster::{residence_raster, rotation_raster, CellStatus, Grid, RasterCell, RasterKind, RasterResult, RasterSection};
pub use returnmap::{return_map_p, ReturnOutcome};

/// Dissociation radius.
pub const R_TERMINAL: f64 = 15.0;
/// Default censoring time.
pub const T_MAX: f64 = 5.0e4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("surface `{0}` does not exist at this energy")]
    MissingSurface(&'static str),
    #[error("orbit is not hyperbolic (R = {0})")]
    NotHyperbolic(f64),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Ds(#[from] DsError),
    #[error(transparent)]
    Porbit(#[from] PorbitError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    B1Plus,
    B1Minus,
    B2,
    B3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceId {
    InnerPlus,
    InnerMinus,
    Middle,
    Outer,
}

impl SurfaceId {
    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceId::InnerPlus => "inner_plus",
            SurfaceId::InnerMinus => "inner_minus",
            SurfaceId::Middle => "middle",
            SurfaceId::Outer => "outer",
        }
    }
}

/// The dividing surfaces at one energy. The middle and outer surfaces exist only where
/// their generating families do.
#[derive(Clone, Debug)]
pub struct Surfaces {
    pub energy: f64,
    pub inner_plus: Arc<DividingSurface>,
    pub inner_minus: Arc<DividingSurface>,
    pub middle: Option<Arc<DividingSurface>>,
    pub outer: Option<Arc<DividingSurface>>,
    pub chart: Option<InnerDSChart>,
}

fn pair(o: PeriodicOrbit, p: &Params) -> Result<[PeriodicOrbit; 2], PorbitError> {
    let q = o.partner(p)?;
    Ok([o, q])
}

impl Surfaces {
    pub fn build(e: f64, p: &Params) -> Result<Self, TransportError> {
        let gi = seed_inner(e, p)?;
        let inner_plus = build_ds(std::slice::from_ref(&gi), e, p)?;
        let inner_minus = inner_plus.rotated(p)?;
        let middle = match seed_middle(e, p) {
            Ok(a) => Some(Arc::new(build_ds(&pair(a, p)?, e, p)?)),
            Err(_) => None,
        };
        let outer = if e > 0.0 {
            match seed_outer(e, p) {
                Ok(o) => Some(Arc::new(build_ds(&pair(o, p)?, e, p)?)),
                Err(_) => None,
            }
        } else {
            None
        };
        let chart = inner_ds_chart(&gi, p).ok();
        Ok(Self { energy: e, inner_plus: Arc::new(inner_plus), inner_minus: Arc::new(inner_minus), middle, outer, chart })
    }

    pub fn get(&self, id: SurfaceId) -> Option<&Arc<DividingSurface>> {
        match id {
            SurfaceId::InnerPlus => Some(&self.inner_plus),
            SurfaceId::InnerMinus => Some(&self.inner_minus),
            SurfaceId::Middle => self.middle.as_ref(),
            SurfaceId::Outer => self.outer.as_ref(),
        }
    }

    /// Crossing events of every existing surface (both directions) followed by the
    /// terminal `r = 15` event; the ids give the surface of each event index.
    pub fn events(&self) -> (Vec<EventSpec<f64>>, Vec<SurfaceId>) {
        let mut ev = Vec::new();
        let mut ids = Vec::new();
        for id in [SurfaceId::InnerPlus, SurfaceId::InnerMinus, SurfaceId::Middle, SurfaceId::Outer] {
            if let Some(ds) = self.get(id) {
                ev.push(ds.event(Direction::Both));
                ids.push(id);
            }
        }
        ev.push(EventSpec::radius(R_TERMINAL, Direction::Increasing).terminal());
        (ev, ids)
    }
}

const BOUNDARY_TOL: f64 = 1e-9;

/// Region by radial position against the surfaces at the state's `θ`. Off the angular
/// extent of an inner arc the well is bounded by the radius of the arc's nearer end
/// (up to `|θ| = π/2` from the well axis). On a surface, the flow direction decides.
pub fn region_of(state: &PhaseState<f64>, s: &Surfaces, p: &Params) -> Result<Region, TransportError> {
    let rate = |ds: &DividingSurface| -> Result<f64, TransportError> {
        let f = equations_of_motion(state, p)?;
        Ok(ds.normal_rate(state, &f))
    };
    let outside = |ds: &DividingSurface| -> Result<bool, TransportError> {
        let g = ds.value(state);
        Ok(if g.abs() < BOUNDARY_TOL { rate(ds)? > 0.0 } else { g > 0.0 })
    };
    match &s.outer {
        Some(o) if outside(o)? => return Ok(Region::B3),
        None if state.r >= R_TERMINAL => return Ok(Region::B3),
        _ => {}
    }
    for (ds, region) in [(&s.inner_plus, Region::B1Plus), (&s.inner_minus, Region::B1Minus)] {
        let d = wrap_signed(state.theta - ds.curve.centre);
        if d.abs() >= std::f64::consts::FRAC_PI_2 {
            continue;
        }
        let (lo, hi) = ds.curve.extent();
        let inside = if d < lo || d > hi {
            let end = if d < lo { lo } else { hi };
            state.r < ds.curve.radius(ds.curve.centre + end).0
        } else {
            !outside(ds)?
        };
        if inside {
            return Ok(region);
        }
    }
    Ok(Region::B2)
}

#[cfg(test)]
mod tests;
