//! Far-field reduction: once the rotor barrier has decayed, `p_θ` is conserved and the
//! radial motion sees a one-dimensional effective potential.

use serde::{Deserialize, Serialize};

use super::potential::long_range_jet;
use super::{ModelError, ModelParams};
use crate::real::Real;

const ISOTROPY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectivePotential<S> {
    pub value: S,
    /// `false` when `U` still varies with `θ` by more than `1e-8` at this radius.
    pub isotropic: bool,
}

/// A circular relative equilibrium of the far-field flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeEquilibrium {
    pub r: f64,
    pub p_theta: f64,
    pub energy: f64,
    /// `∂²H/∂r²` at the equilibrium; negative means radially unstable.
    pub h_rr: f64,
}

/// Angle-averaged potential and its first two radial derivatives.
fn averaged<S: Real>(r: S, p: &ModelParams<S>) -> (S, S, S, S) {
    let (u, du, d2u) = long_range_jet(r, p);
    let two = S::lit(2.0);
    let d = r - p.re;
    let u0 = p.ue * (-p.a * d * d).exp();
    let u0_r = -two * p.a * d * u0;
    let u0_rr = (S::lit(4.0) * p.a * p.a * d * d - two * p.a) * u0;
    let h = S::lit(0.5);
    (u + h * u0, du + h * u0_r, d2u + h * u0_rr, u0)
}

/// `V_red(r) = (p_θ − λ)²/(2 m r²) + U(r)` with `U` averaged over `θ`.
pub fn reduced_effective_potential<S: Real>(r: S, p_theta: S, p: &ModelParams<S>) -> Result<EffectivePotential<S>, ModelError> {
    if r < p.r_cut {
        return Err(ModelError::BelowCutoff { r: r.as_f64(), r_cut: p.r_cut.as_f64() });
    }
    let (u, _, _, u0) = averaged(r, p);
    let l = p_theta - p.lambda;
    Ok(EffectivePotential {
        value: l * l / (S::lit(2.0) * p.m * r * r) + u,
        isotropic: u0.abs() < S::lit(ISOTROPY_TOL),
    })
}

/// Radius of the circular orbit with angular momentum `p_θ`: the outermost zero of
/// `ṗ_r = (p_θ − λ)²/(m r³) − U'(r)`.
pub fn relative_equilibrium_radius<S: Real>(p_theta: S, p: &ModelParams<S>) -> Result<RelativeEquilibrium, ModelError> {
    let l = p_theta - p.lambda;
    if l == S::zero() {
        return Err(ModelError::NoRoot("p_theta equals lambda".into()));
    }
    let l2 = l * l;
    let f = |r: S| l2 / (p.m * r * r * r) - averaged(r, p).1;
    // Scan inward from far away; f > 0 there since U' decays like r⁻⁵.
    let n = 4000;
    let (lo, hi) = (S::lit(1.5).max(p.r_cut).ln(), S::lit(1e4).ln());
    let at = |i: usize| (hi - (hi - lo) * S::lit(i as f64 / n as f64)).exp();
    let mut prev = at(0);
    let mut fprev = f(prev);
    for i in 1..=n {
        let r = at(i);
        let fr = f(r);
        if (fr <= S::zero()) && (fprev > S::zero()) {
            let (mut a, mut b) = (r, prev);
            for _ in 0..200 {
                let m = S::lit(0.5) * (a + b);
                if f(m) > S::zero() {
                    b = m;
                } else {
                    a = m;
                }
                if b - a < S::lit(1e-13) * b {
                    break;
                }
            }
            let r = S::lit(0.5) * (a + b);
            let (u, _, d2u, _) = averaged(r, p);
            let mr2 = p.m * r * r;
            let energy = p_theta * p_theta / (S::lit(2.0) * p.inertia) + l2 / (S::lit(2.0) * mr2) + u;
            let h_rr = S::lit(3.0) * l2 / (mr2 * r * r) + d2u;
            return Ok(RelativeEquilibrium {
                r: r.as_f64(),
                p_theta: p_theta.as_f64(),
                energy: energy.as_f64(),
                h_rr: h_rr.as_f64(),
            });
        }
        prev = r;
        fprev = fr;
    }
    Err(ModelError::NoRoot(format!("no relative equilibrium for p_theta = {}", p_theta.as_f64())))
}

/// Relative equilibrium with `p_θ > λ` and total energy `E`, found by bisection on `p_θ`.
pub fn relative_equilibrium_at_energy<S: Real>(e: S, p: &ModelParams<S>) -> Result<RelativeEquilibrium, ModelError> {
    if e <= S::zero() {
        return Err(ModelError::NoRoot("circular far-field orbits need E > 0".into()));
    }
    let energy = |pt: f64| relative_equilibrium_radius(S::lit(pt), p).map(|q| q.energy);
    let target = e.as_f64();
    let lam = p.lambda.as_f64();
    let (mut a, mut b) = (lam + 1e-6, lam + 1.0);
    while energy(b)? < target {
        a = b;
        b *= 2.0;
        if b > 1e6 {
            return Err(ModelError::NoRoot("energy out of range".into()));
        }
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if energy(m)? < target {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-14 * b {
            break;
        }
    }
    relative_equilibrium_radius(S::lit(0.5 * (a + b)), p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ModelParams<f64> {
        ModelParams::default()
    }

    #[test]
    fn no_centrifugal_term_at_lambda() {
        let p = p().with_lambda(0.4);
        let v = reduced_effective_potential(12.0, 0.4, &p).unwrap();
        assert!(v.isotropic);
        assert!((v.value - super::super::potential_long_range(12.0, &p).unwrap()).abs() < 1e-12);
        assert!(!reduced_effective_potential(2.0, 0.4, &p).unwrap().isotropic);
    }

    #[test]
    fn decays_at_infinity() {
        let v = reduced_effective_potential(1e4, 3.0, &p()).unwrap();
        assert!(v.value.abs() < 1e-6);
    }

    #[test]
    fn local_maximum_in_r() {
        let p = p();
        let pt = 3.0;
        let dv = |r: f64| {
            let h = 1e-5;
            (reduced_effective_potential(r + h, pt, &p).unwrap().value
                - reduced_effective_potential(r - h, pt, &p).unwrap().value)
                / (2.0 * h)
        };
        let mut crossings = Vec::new();
        let mut prev = dv(3.0);
        for i in 1..=9700 {
            let r = 3.0 + 0.01 * i as f64;
            let d = dv(r);
            if prev < 0.0 && d >= 0.0 || prev > 0.0 && d <= 0.0 {
                crossings.push((r, prev > 0.0));
            }
            prev = d;
        }
        let (rmax, _) = *crossings.iter().rev().find(|c| c.1).unwrap();
        let re = relative_equilibrium_radius(pt, &p).unwrap();
        assert!((rmax - re.r).abs() < 0.02, "{rmax} {}", re.r);
        assert!(re.h_rr < 0.0);
    }

    #[test]
    fn radius_is_monotone_in_momentum() {
        // With an r⁻⁴ tail the balance l²/(m r³) = U'(r) gives r ∝ 1/l: the orbit moves
        // out to infinity as the angular momentum (and the energy) goes to zero.
        let p = p();
        let mut last = f64::INFINITY;
        for pt in [0.5, 1.0, 2.0, 3.0, 4.0] {
            let q = relative_equilibrium_radius(pt, &p).unwrap();
            assert!(q.r < last);
            assert!(q.h_rr < 0.0);
            last = q.r;
        }
        assert!(relative_equilibrium_radius(0.0, &p).is_err());
    }

    #[test]
    fn power_law_tail_is_unstable() {
        // U = −c r^{−(2+ε)}: at the balance point ∂²H/∂r² = −c ε (2+ε) / r^{4+ε}.
        let (c, eps, m, r) = (3.0f64, 1.5f64, 0.9f64, 7.0f64);
        let u1 = c * (2.0 + eps) * r.powf(-(3.0 + eps));
        let u2 = -c * (2.0 + eps) * (3.0 + eps) * r.powf(-(4.0 + eps));
        let l2 = m * r.powi(3) * u1;
        let h_rr = 3.0 * l2 / (m * r.powi(4)) + u2;
        let want = -c * eps * (2.0 + eps) / r.powf(4.0 + eps);
        assert!((h_rr - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn energy_inversion() {
        let q = relative_equilibrium_at_energy(2.0, &p()).unwrap();
        assert!((q.energy - 2.0).abs() < 1e-10);
        assert!(q.r > 5.0 && q.r < 8.0, "{}", q.r);
    }
}
