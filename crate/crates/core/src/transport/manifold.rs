//! Stable and unstable cylinders of hyperbolic periodic orbits, seeded from the
//! linearization on a loop around the orbit.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::integrate::{Direction, EventSpec, Propagator, Tolerances};
use crate::model::{hamiltonian, hamiltonian_gradient, PhaseState};
use crate::porbit::{shot_tolerances, PeriodicOrbit};
use crate::Params;

use super::{SurfaceId, Surfaces, TransportError, R_TERMINAL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Stable,
    Unstable,
}

/// `Plus` leaves the orbit toward larger `r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    /// Orbit phase `t/T` in `[0, 1)`.
    pub phase: f64,
    pub state: PhaseState<f64>,
}

/// Seeds `x(φT) + ε λ^{−φ} M(φT) v` for the eigenvector `v`: a closed loop on the
/// cylinder (the Floquet-normalized displacement is periodic in `φ`) that every
/// trajectory of the branch crosses once, to linear order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifoldBranch {
    pub generator: PeriodicOrbit,
    pub kind: ManifoldKind,
    pub side: Side,
    /// Multiplier of the branch direction (`|λ| > 1` unstable, `< 1` stable).
    pub multiplier: f64,
    pub eigenvector: [f64; 4],
    pub epsilon: f64,
    pub seeds: Vec<Seed>,
    /// Seed budget left for refinement.
    pub budget: usize,
    /// Refinement stopped on the budget with gaps left.
    pub exhausted: bool,
}

pub const DEFAULT_EPSILON: f64 = 1e-7;

impl ManifoldBranch {
    /// Time direction in which the branch leaves the orbit.
    pub fn time_sign(&self) -> f64 {
        match self.kind {
            ManifoldKind::Unstable => 1.0,
            ManifoldKind::Stable => -1.0,
        }
    }

    /// Seed at phase `phi`, projected onto the energy surface.
    pub fn seed_at(&self, phi: f64, p: &Params) -> Result<Seed, TransportError> {
        let o = &self.generator;
        let phi = phi.rem_euclid(1.0);
        let (x, w) = if phi == 0.0 {
            (o.point, self.eigenvector)
        } else {
            let run = Propagator::new(p).tolerances(shot_tolerances()).run_variational(&o.point, phi * o.period)?;
            let m = run.monodromy.expect("variational run");
            let w: [f64; 4] = std::array::from_fn(|i| (0..4).map(|k| m[i][k] * self.eigenvector[k]).sum());
            (run.trajectory.final_state, w)
        };
        let scale = self.epsilon * self.multiplier.abs().powf(-phi);
        let a = x.to_array();
        let mut s = PhaseState::from_slice(&std::array::from_fn::<f64, 4, _>(|i| a[i] + scale * w[i]));
        for _ in 0..3 {
            let dh = hamiltonian_gradient(&s, p)?;
            let res = hamiltonian(&s, p)? - o.energy;
            let g2: f64 = dh.iter().map(|v| v * v).sum();
            let b = s.to_array();
            s = PhaseState::from_slice(&std::array::from_fn::<f64, 4, _>(|i| b[i] - res * dh[i] / g2));
        }
        Ok(Seed { phase: phi, state: s })
    }

    /// Number of seeds whose trajectories, followed away from the orbit for up to `t_max`,
    /// cross any of `targets` before reaching `r = 15`.
    pub fn count_reaching(
        &self,
        surfaces: &Surfaces,
        targets: &[SurfaceId],
        t_max: f64,
        tol: Tolerances,
        p: &Params,
    ) -> Result<usize, TransportError> {
        let mut events = Vec::new();
        for id in targets {
            let ds = surfaces.get(*id).ok_or(TransportError::MissingSurface(id.as_str()))?;
            events.push(ds.event(Direction::Both).terminal());
        }
        let n = events.len();
        events.push(EventSpec::radius(R_TERMINAL, Direction::Increasing).terminal());
        let prop = Propagator::new(p).tolerances(tol).events(events);
        let sign = self.time_sign();
        let hits = self
            .seeds
            .par_iter()
            .map(|s| -> Result<bool, TransportError> {
                let run = prop.run(&s.state, sign * t_max)?;
                Ok(run.log.records.iter().any(|r| r.event < n && !r.grazing))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(hits.into_iter().filter(|&h| h).count())
    }

    /// Largest `|H − E|` over the seeds.
    pub fn energy_residual(&self, p: &Params) -> f64 {
        self.seeds
            .iter()
            .map(|s| hamiltonian(&s.state, p).map(|h| (h - self.generator.energy).abs()).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}

/// Real eigenvector of `M` for the eigenvalue `lambda`, unit length.
fn eigenvector(m: &[[f64; 4]; 4], lambda: f64) -> [f64; 4] {
    let a = Matrix4::from_fn(|i, k| m[i][k] - if i == k { lambda } else { 0.0 });
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (k, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let v = vt.row(k);
    let n = v.norm();
    std::array::from_fn(|i| v[i] / n)
}

/// Seeds `n_seeds` points at distance `epsilon` (in Floquet-normalized units) along the
/// requested branch; `budget` caps the seeds the refinement may add later.
pub fn grow_manifold(
    orbit: &PeriodicOrbit,
    kind: ManifoldKind,
    side: Side,
    n_seeds: usize,
    epsilon: f64,
    budget: usize,
    p: &Params,
) -> Result<ManifoldBranch, TransportError> {
    if !(orbit.residue < 0.0) {
        return Err(TransportError::NotHyperbolic(orbit.residue));
    }
    if n_seeds < 3 {
        return Err(TransportError::Invalid("at least three seeds are needed".into()));
    }
    // λ + 1/λ = Tr M − 2 = 2 − 4R.
    let s = 2.0 - 4.0 * orbit.residue;
    let lu = 0.5 * (s + (s * s - 4.0).sqrt());
    let lambda = match kind {
        ManifoldKind::Unstable => lu,
        ManifoldKind::Stable => 1.0 / lu,
    };
    let mut v = eigenvector(&orbit.monodromy, lambda);
    // The side is read off the radial component at the seed point, or off p_r there
    // when the eigenvector is tangent to the circle r = const.
    let radial = if v[0].abs() > 1e-6 { v[0] } else { v[2] };
    let want = match side {
        Side::Plus => 1.0,
        Side::Minus => -1.0,
    };
    if radial * want < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let mut branch = ManifoldBranch {
        generator: orbit.clone(),
        kind,
        side,
        multiplier: lambda,
        eigenvector: v,
        epsilon,
        seeds: Vec::new(),
        budget,
        exhausted: false,
    };
    branch.seeds = (0..n_seeds)
        .into_par_iter()
        .map(|k| branch.seed_at(k as f64 / n_seeds as f64, p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(branch)
}

/// Whether any of `n_seeds` trajectories of `Wˢ⁻(Γᵒ₊)` at `e`, followed backward for
/// `t_max`, crosses an inner surface.
pub fn outer_stable_reaches_inner(e: f64, n_seeds: usize, t_max: f64, tol: Tolerances, p: &Params) -> Result<bool, TransportError> {
    let s = Surfaces::build(e, p)?;
    let o = &s.outer.as_ref().ok_or(TransportError::MissingSurface("outer"))?.generators[0];
    let b = grow_manifold(o, ManifoldKind::Stable, Side::Minus, n_seeds, DEFAULT_EPSILON, 0, p)?;
    Ok(b.count_reaching(&s, &[SurfaceId::InnerPlus, SurfaceId::InnerMinus], t_max, tol, p)? > 0)
}

/// Bisects `[e_lo, e_hi]` for the energy where `Wˢ⁻(Γᵒ₊)` stops reaching the inner
/// surfaces; `e_lo` must reach and `e_hi` must not. Returns the final bracket.
pub fn heteroclinic_threshold(
    e_lo: f64,
    e_hi: f64,
    width: f64,
    n_seeds: usize,
    t_max: f64,
    p: &Params,
) -> Result<(f64, f64), TransportError> {
    let tol = Tolerances::sweep();
    let reaches = |e: f64| outer_stable_reaches_inner(e, n_seeds, t_max, tol, p);
    if !reaches(e_lo)? || reaches(e_hi)? {
        return Err(TransportError::Invalid(format!("[{e_lo}, {e_hi}] does not bracket the threshold")));
    }
    let (mut a, mut b) = (e_lo, e_hi);
    while b - a > width {
        let m = 0.5 * (a + b);
        if reaches(m)? {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((a, b))
}
