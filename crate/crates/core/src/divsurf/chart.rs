//! Canonical coordinates adapted to the inner surface: `ρ = r − r̄(θ)`, `σ = θ`, from the
//! generating function `G = (r − r̄(θ)) p_ρ + θ p_σ`.

use serde::{Deserialize, Serialize};

use crate::model::{potential_total, PhaseState};
use crate::porbit::{OrbitKind, PeriodicOrbit};
use crate::Params;

use super::{ConfigCurve, DsError, CURVE_NODES};

/// Largest admissible `max |r − r̄(θ)| / max r` over the orbit.
pub const CHART_FIT_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerDSChart {
    /// `r̄(θ) = c₀ + c₁θ + c₂θ²` with `θ` measured from the orbit's symmetry ray.
    pub coeffs: [f64; 3],
    pub centre: f64,
    pub energy: f64,
    /// Relative to the largest radius on the orbit.
    pub fit_residual: f64,
    lambda_m_inertia: (f64, f64, f64),
}

impl InnerDSChart {
    pub fn rbar(&self, sigma: f64) -> (f64, f64) {
        let x = sigma - self.centre;
        let [c0, c1, c2] = self.coeffs;
        (c0 + x * (c1 + x * c2), c1 + 2.0 * c2 * x)
    }

    /// `(r, θ, p_r, p_θ) ↦ (ρ, σ, p_ρ, p_σ)`.
    pub fn to_chart(&self, s: &PhaseState<f64>) -> [f64; 4] {
        let (rb, drb) = self.rbar(s.theta);
        [s.r - rb, s.theta, s.p_r, s.p_theta + drb * s.p_r]
    }

    pub fn from_chart(&self, c: &[f64; 4]) -> PhaseState<f64> {
        let (rb, drb) = self.rbar(c[1]);
        PhaseState::new(c[0] + rb, c[1], c[2], c[3] - drb * c[2])
    }

    /// Point of the outward hemisphere `ρ = 0, ρ̇ > 0` over `(σ, p_σ)`; `None` off the
    /// energy surface. `ρ̇ = ∂H/∂p_ρ`, so the larger root of the energy equation is taken.
    pub fn outward_point(&self, sigma: f64, p_sigma: f64, p: &Params) -> Option<PhaseState<f64>> {
        let (rb, drb) = self.rbar(sigma);
        if rb <= p.r_cut {
            return None;
        }
        let (lambda, m, inertia) = self.lambda_m_inertia;
        let mr2 = m * rb * rb;
        let u = potential_total(rb, sigma, p).ok()?;
        // H = p_ρ²/2m + p_θ²/2I + (p_θ − λ)²/2mr² + U with p_θ = p_σ − r̄′ p_ρ.
        let a2 = 1.0 / (2.0 * m) + drb * drb * (0.5 / inertia + 0.5 / mr2);
        let a1 = -drb * (p_sigma / inertia + (p_sigma - lambda) / mr2);
        let a0 = p_sigma * p_sigma / (2.0 * inertia) + (p_sigma - lambda).powi(2) / (2.0 * mr2) + u - self.energy;
        let disc = a1 * a1 - 4.0 * a2 * a0;
        if disc < 0.0 {
            return None;
        }
        let p_rho = (-a1 + disc.sqrt()) / (2.0 * a2);
        Some(self.from_chart(&[0.0, sigma, p_rho, p_sigma]))
    }
}

/// Least-squares quadratic through the configuration projection of `Γⁱ₊`.
pub fn inner_ds_chart(orbit: &PeriodicOrbit, p: &Params) -> Result<InnerDSChart, DsError> {
    if orbit.kind != OrbitKind::Brake {
        return Err(DsError::Generators("the inner chart needs a brake orbit".into()));
    }
    let curve = ConfigCurve::from_orbit(orbit, CURVE_NODES, p)?;
    let centre = curve.centre;
    let xs: Vec<f64> = curve.nodes.iter().map(|n| crate::real::wrap_signed(n.theta - centre)).collect();
    let a = nalgebra::DMatrix::from_fn(xs.len(), 3, |i, k| xs[i].powi(k as i32));
    let b = nalgebra::DVector::from_iterator(xs.len(), curve.nodes.iter().map(|n| n.r));
    let sol = a.clone().svd(true, true).solve(&b, 1e-14).map_err(|e| DsError::Generators(e.to_string()))?;
    let fit = &a * &sol;
    let residual = (fit - &b).amax() / b.amax();
    if residual > CHART_FIT_TOL {
        return Err(DsError::FitResidual(residual));
    }
    Ok(InnerDSChart {
        coeffs: [sol[0], sol[1], sol[2]],
        centre,
        energy: orbit.energy,
        fit_residual: residual,
        lambda_m_inertia: (p.lambda, p.m, p.inertia),
    })
}
