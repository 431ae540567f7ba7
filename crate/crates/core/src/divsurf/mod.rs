//! Dividing surfaces spanned by transition-state orbits: spheres over brake orbits, tori
//! over rotating pairs. Crossing orientation, flux and the inner-surface chart.

mod chart;
mod curve;

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{Direction, EventSpec, IntegrateError, SurfaceFunction};
use crate::model::{hamiltonian, ModelError, PhaseState};
use crate::porbit::{OrbitKind, PeriodicOrbit, Stability};
use crate::Params;

pub use chart::{inner_ds_chart, InnerDSChart, CHART_FIT_TOL};
pub use curve::{ConfigCurve, CurveNode};

/// Nodes per generator orbit.
pub const CURVE_NODES: usize = 2048;
/// Relative agreement required between the action and the surface quadrature.
pub const FLUX_TOL: f64 = 1e-4;
const TANGENT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DsError {
    #[error("generator is at E = {found}, not at the requested E = {expected}")]
    OffEnergy { expected: f64, found: f64 },
    #[error("negative kinetic energy {kinetic:e} on the configuration curve at r = {r}, θ = {theta}")]
    EmptyFiber { r: f64, theta: f64, kinetic: f64 },
    #[error("{0}")]
    Generators(String),
    #[error("configuration curve is not a graph over θ")]
    NotAGraph,
    #[error("flux mismatch: action {action}, quadrature {quadrature} (relative {rel:e})")]
    FluxMismatch { action: f64, quadrature: f64, rel: f64 },
    #[error("quadratic fit residual {0:e} exceeds the chart tolerance")]
    FitResidual(f64),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Sphere,
    Torus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossing {
    Outward,
    Inward,
    Tangent,
}

/// The surface `{q on the generator curve, H = E}`. Outward is the side of larger `r`
/// across the curve, which holds the prototypical `θ = 0, p_θ = 0, p_r > 0` trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DividingSurface {
    pub topology: Topology,
    pub generators: Vec<PeriodicOrbit>,
    pub energy: f64,
    pub curve: ConfigCurve,
    /// Generator not hyperbolic: usable as a section, not as a no-recrossing surface.
    pub admits_local_recrossings: bool,
    lambda_m_inertia: (f64, f64, f64),
}

impl DividingSurface {
    /// `g = r − R(θ)`; positive outside.
    pub fn value(&self, s: &PhaseState<f64>) -> f64 {
        s.r - self.curve.radius(s.theta).0
    }

    /// Whether the configuration point lies over the curve (always for a torus).
    pub fn covers(&self, theta: f64) -> bool {
        self.curve.covers(theta)
    }

    /// Rate `dg/dt` for the configuration velocity `(ṙ, θ̇)`.
    pub fn normal_rate(&self, s: &PhaseState<f64>, velocity: &[f64]) -> f64 {
        let (_, slope) = self.curve.radius(s.theta);
        velocity[0] - slope * velocity[1]
    }

    /// The same surface rotated by `θ ↦ θ + π` (the twin inner surface).
    pub fn rotated(&self, p: &Params) -> Result<DividingSurface, DsError> {
        let gens = self
            .generators
            .iter()
            .map(|g| g.partner(p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| DsError::Generators(e.to_string()))?;
        let mut ds = self.clone();
        ds.generators = gens;
        ds.curve = self.curve.rotated(std::f64::consts::PI);
        Ok(ds)
    }

    /// Point of the surface over curve node `k` at fiber angle `phi`; `phi = 0` has the
    /// largest `p_r` on the fiber.
    pub fn point(&self, k: usize, phi: f64) -> PhaseState<f64> {
        let n = &self.curve.nodes[k];
        let (lambda, m, inertia) = self.lambda_m_inertia;
        let (pc, c, a) = fiber(n.r, self.energy - n.u, lambda, m, inertia);
        let c = c.max(0.0);
        PhaseState::new(n.r, n.theta, (2.0 * m * c).sqrt() * phi.cos(), pc + (c / a).sqrt() * phi.sin())
    }

    /// Event function for the integrator; crossings off the curve's `θ` range are rejected.
    pub fn surface_function(self: &Arc<Self>) -> Arc<dyn SurfaceFunction<f64>> {
        Arc::new(DsSurface(self.clone()))
    }

    pub fn event(self: &Arc<Self>, direction: Direction) -> EventSpec<f64> {
        EventSpec::surface(self.surface_function(), direction)
    }

    /// CSV with columns `s, r, theta, p_r_max`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["s", "r", "theta", "p_r_max"])?;
        let m = self.lambda_m_inertia.1;
        for n in &self.curve.nodes {
            let (_, c, _) = fiber(n.r, self.energy - n.u, self.lambda_m_inertia.0, m, self.lambda_m_inertia.2);
            out.write_record([n.s, n.r, n.theta, (2.0 * m * c.max(0.0)).sqrt()].map(|v| format!("{v:.12}")))?;
        }
        out.flush()
    }
}

struct DsSurface(Arc<DividingSurface>);

impl SurfaceFunction<f64> for DsSurface {
    fn value(&self, s: &PhaseState<f64>) -> f64 {
        self.0.value(s)
    }
    fn gradient(&self, s: &PhaseState<f64>) -> [f64; 4] {
        let (_, slope) = self.0.curve.radius(s.theta);
        [1.0, -slope, 0.0, 0.0]
    }
    fn accept(&self, s: &PhaseState<f64>) -> bool {
        self.0.covers(s.theta)
    }
}

/// Kinetic energy on the fiber over radius `r` with `E − U = w`, written as
/// `p_r²/2m + a (p_θ − p_c)² = c`. Returns `(p_c, c, a)`.
fn fiber(r: f64, w: f64, lambda: f64, m: f64, inertia: f64) -> (f64, f64, f64) {
    let mr2 = m * r * r;
    let a = 0.5 * (1.0 / inertia + 1.0 / mr2);
    let b = -lambda / mr2;
    let pc = -b / (2.0 * a);
    let k_min = lambda * lambda / (2.0 * mr2) - b * b / (4.0 * a);
    (pc, w - k_min, a)
}

/// Sphere over one brake orbit or torus over a rotating `±` pair.
pub fn build_ds(generators: &[PeriodicOrbit], e: f64, p: &Params) -> Result<DividingSurface, DsError> {
    let first = generators.first().ok_or_else(|| DsError::Generators("no generator orbit".into()))?;
    for g in generators {
        let found = hamiltonian(&g.point, p)?;
        if (found - e).abs() > 1e-8 * e.abs().max(1.0) {
            return Err(DsError::OffEnergy { expected: e, found });
        }
    }
    let topology = match (first.kind, generators.len()) {
        (OrbitKind::Brake, 1) => Topology::Sphere,
        (OrbitKind::Rotating, 2) => Topology::Torus,
        (OrbitKind::Brake, n) => return Err(DsError::Generators(format!("a sphere takes one brake orbit, got {n}"))),
        (OrbitKind::Rotating, n) => return Err(DsError::Generators(format!("a torus takes a rotating pair, got {n}"))),
    };
    if topology == Topology::Torus {
        let (a, b) = (&generators[0], &generators[1]);
        if a.point.p_theta * b.point.p_theta >= 0.0 || b.kind != OrbitKind::Rotating {
            return Err(DsError::Generators("torus generators must rotate in opposite senses".into()));
        }
    }
    let curve = ConfigCurve::from_orbit(first, CURVE_NODES, p)?;
    for n in &curve.nodes {
        let (_, c, _) = fiber(n.r, e - n.u, p.lambda, p.m, p.inertia);
        if c < -1e-9 * e.abs().max(1.0) {
            return Err(DsError::EmptyFiber { r: n.r, theta: n.theta, kinetic: c });
        }
    }
    if topology == Topology::Torus {
        // The partner must project onto the same closed curve.
        let q = &generators[1].point;
        let off = q.r - curve.radius(q.theta).0;
        if off.abs() > 1e-6 {
            return Err(DsError::Generators(format!("partner orbit is {off:e} off the configuration curve")));
        }
    }
    Ok(DividingSurface {
        topology,
        generators: generators.to_vec(),
        energy: e,
        curve,
        admits_local_recrossings: generators.iter().any(|g| g.stability != Stability::Hyperbolic),
        lambda_m_inertia: (p.lambda, p.m, p.inertia),
    })
}

/// Sign of the normal component of the configuration velocity `(ṙ, θ̇, …)`.
pub fn classify_crossing(ds: &DividingSurface, state: &PhaseState<f64>, velocity: &[f64]) -> Crossing {
    let v = ds.normal_rate(state, velocity);
    if v > TANGENT_TOL {
        Crossing::Outward
    } else if v < -TANGENT_TOL {
        Crossing::Inward
    } else {
        Crossing::Tangent
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    /// `S` of the brake orbit, or `S(Γ₊) + S(Γ₋)` for a torus.
    pub action: f64,
    /// Symplectic area of one piece by quadrature over the curve.
    pub quadrature: f64,
    pub relative_difference: f64,
    pub admits_local_recrossings: bool,
}

impl FluxReport {
    pub fn agrees(&self) -> bool {
        self.relative_difference <= FLUX_TOL
    }

    /// The action flux, or the mismatch as an error.
    pub fn checked(&self) -> Result<f64, DsError> {
        if self.agrees() {
            Ok(self.action)
        } else {
            Err(DsError::FluxMismatch { action: self.action, quadrature: self.quadrature, rel: self.relative_difference })
        }
    }
}

/// Flux through one piece. Over each configuration point the fiber is an ellipse and
/// `p·q′` sweeps `[−A, A]` across it, so the piece's area is `2∫A ds` with
/// `A = √(2c (m v_r² + v_θ²/2a))` for the unit tangent `v`.
pub fn flux(ds: &DividingSurface) -> FluxReport {
    let (lambda, m, inertia) = ds.lambda_m_inertia;
    let quadrature: f64 = ds
        .curve
        .nodes
        .iter()
        .map(|n| {
            let (_, c, a) = fiber(n.r, ds.energy - n.u, lambda, m, inertia);
            2.0 * n.weight * (2.0 * c.max(0.0) * (m * n.tangent[0].powi(2) + n.tangent[1].powi(2) / (2.0 * a))).sqrt()
        })
        .sum();
    let action: f64 = ds.generators.iter().map(|g| g.action).sum();
    FluxReport {
        action,
        quadrature,
        relative_difference: (quadrature - action).abs() / action.abs(),
        admits_local_recrossings: ds.admits_local_recrossings,
    }
}

/// One row of the flux table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxRow {
    pub energy: f64,
    /// Both inner surfaces together.
    pub inner: f64,
    pub middle: Option<f64>,
    pub outer: Option<f64>,
}

pub fn write_flux_table<W: Write>(rows: &[FluxRow], w: W) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["E", "flux_inner", "flux_middle", "flux_outer"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.10}"));
    for r in rows {
        out.write_record([format!("{:.6}", r.energy), format!("{:.10}", r.inner), opt(r.middle), opt(r.outer)])?;
    }
    out.flush()
}

#[cfg(test)]
mod tests;
