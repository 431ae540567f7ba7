use serde::{Deserialize, Serialize};

use super::potential::jet_unchecked;
use super::{potential_total, ModelError, ModelParams};
use crate::real::Real;

/// A point `(r, θ, p_r, p_θ)` of the reduced phase space. `theta` is unwrapped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct PhaseState<S> {
    pub r: S,
    pub theta: S,
    pub p_r: S,
    pub p_theta: S,
}

impl<S: Real> PhaseState<S> {
    pub fn new(r: S, theta: S, p_r: S, p_theta: S) -> Self {
        Self { r, theta, p_r, p_theta }
    }

    #[inline]
    pub fn to_array(self) -> [S; 4] {
        [self.r, self.theta, self.p_r, self.p_theta]
    }

    #[inline]
    pub fn from_slice(y: &[S]) -> Self {
        Self { r: y[0], theta: y[1], p_r: y[2], p_theta: y[3] }
    }

    /// Image under `(r, θ, p_r, p_θ) → (r, −θ, p_r, −p_θ)`.
    pub fn reflected(self) -> Self {
        Self { r: self.r, theta: -self.theta, p_r: self.p_r, p_theta: -self.p_theta }
    }

    /// Image under time reversal `(p_r, p_θ) → (−p_r, −p_θ)`.
    pub fn reversed(self) -> Self {
        Self { p_r: -self.p_r, p_theta: -self.p_theta, ..self }
    }

    pub fn cast<T: Real>(self) -> PhaseState<T> {
        PhaseState {
            r: T::lit(self.r.as_f64()),
            theta: T::lit(self.theta.as_f64()),
            p_r: T::lit(self.p_r.as_f64()),
            p_theta: T::lit(self.p_theta.as_f64()),
        }
    }
}

/// `1/I + 1/(m r²)`, the angular inverse mass.
#[inline]
pub fn angular_inverse_mass<S: Real>(r: S, p: &ModelParams<S>) -> S {
    p.inertia.recip() + (p.m * r * r).recip()
}

#[inline]
pub(crate) fn kinetic<S: Real>(r: S, p_r: S, p_theta: S, p: &ModelParams<S>) -> S {
    let half = S::lit(0.5);
    let l = p_theta - p.lambda;
    half * p_r * p_r / p.m + half * p_theta * p_theta / p.inertia + half * l * l / (p.m * r * r)
}

#[inline]
pub(crate) fn hamiltonian_unchecked<S: Real>(y: &[S], p: &ModelParams<S>) -> S {
    kinetic(y[0], y[2], y[3], p) + super::potential::total_unchecked(y[0], y[1], p)
}

pub fn hamiltonian<S: Real>(s: &PhaseState<S>, p: &ModelParams<S>) -> Result<S, ModelError> {
    Ok(kinetic(s.r, s.p_r, s.p_theta, p) + potential_total(s.r, s.theta, p)?)
}

#[inline]
pub(crate) fn eom_unchecked<S: Real>(y: &[S], p: &ModelParams<S>, dy: &mut [S]) {
    let (r, th, pr, pt) = (y[0], y[1], y[2], y[3]);
    let j = jet_unchecked(r, th, p);
    let mr2 = p.m * r * r;
    let l = pt - p.lambda;
    dy[0] = pr / p.m;
    dy[1] = pt / p.inertia + l / mr2;
    dy[2] = l * l / (mr2 * r) - j.u_r;
    dy[3] = -j.u_th;
}

/// Hamilton's equations `(ṙ, θ̇, ṗ_r, ṗ_θ)`.
pub fn equations_of_motion<S: Real>(s: &PhaseState<S>, p: &ModelParams<S>) -> Result<[S; 4], ModelError> {
    if s.r < p.r_cut {
        return Err(ModelError::BelowCutoff { r: s.r.as_f64(), r_cut: p.r_cut.as_f64() });
    }
    let mut dy = [S::zero(); 4];
    eom_unchecked(&s.to_array(), p, &mut dy);
    Ok(dy)
}

/// `∇H = (∂H/∂r, ∂H/∂θ, ∂H/∂p_r, ∂H/∂p_θ)`.
pub fn hamiltonian_gradient<S: Real>(s: &PhaseState<S>, p: &ModelParams<S>) -> Result<[S; 4], ModelError> {
    let f = equations_of_motion(s, p)?;
    Ok([-f[2], -f[3], f[0], f[1]])
}

/// Second derivatives of `H`, row-major in `(r, θ, p_r, p_θ)`.
#[inline]
pub(crate) fn hessian_unchecked<S: Real>(y: &[S], p: &ModelParams<S>) -> [[S; 4]; 4] {
    let (r, th, pt) = (y[0], y[1], y[3]);
    let j = jet_unchecked(r, th, p);
    let z = S::zero();
    let l = pt - p.lambda;
    let mr3 = p.m * r * r * r;
    let h_rr = S::lit(3.0) * l * l / (mr3 * r) + j.u_rr;
    let h_rpt = -S::lit(2.0) * l / mr3;
    [
        [h_rr, j.u_rth, z, h_rpt],
        [j.u_rth, j.u_thth, z, z],
        [z, z, p.m.recip(), z],
        [h_rpt, z, z, angular_inverse_mass(r, p)],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> ModelParams<f64> {
        ModelParams::default()
    }

    #[test]
    fn well_energy() {
        let s = PhaseState::new(1.1, 0.0, 0.0, 0.0);
        assert!((hamiltonian(&s, &p()).unwrap() + 47.0).abs() < 1e-12);
    }

    #[test]
    fn axis_only_radial_force() {
        let f = equations_of_motion(&PhaseState::new(2.0, 0.0, 0.0, 0.0), &p()).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[3], 0.0);
        assert!(f[2] != 0.0);
    }

    #[test]
    fn p_r_term_quadratic() {
        let p = p();
        let base = hamiltonian(&PhaseState::new(2.0, 0.3, 0.0, 0.4), &p).unwrap();
        let t1 = hamiltonian(&PhaseState::new(2.0, 0.3, 1.5, 0.4), &p).unwrap() - base;
        let t2 = hamiltonian(&PhaseState::new(2.0, 0.3, 3.0, 0.4), &p).unwrap() - base;
        assert!((t2 - 4.0 * t1).abs() < 1e-12);
    }

    #[test]
    fn lambda_terms() {
        let p = p().with_lambda(0.7);
        let s = PhaseState::new(1.7, 0.2, 0.3, -0.4);
        let h = hamiltonian(&s, &p).unwrap();
        let (r, pt, l, m, i) = (s.r, s.p_theta, p.lambda, p.m, p.inertia);
        let lit = s.p_r * s.p_r / (2.0 * m) + 0.5 * (1.0 / i + 1.0 / (m * r * r)) * pt * pt
            - l * pt / (m * r * r)
            + l * l / (2.0 * m * r * r)
            + potential_total(r, s.theta, &p).unwrap();
        assert!((h - lit).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn reflection_invariance(r in 0.9f64..10.0, th in -3.0f64..3.0, pr in -5.0f64..5.0, pt in -5.0f64..5.0) {
            let p = p();
            let s = PhaseState::new(r, th, pr, pt);
            let a = hamiltonian(&s, &p).unwrap();
            let b = hamiltonian(&s.reflected(), &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn flow_orthogonal_to_gradient(r in 0.9f64..10.0, th in -3.0f64..3.0, pr in -5.0f64..5.0, pt in -5.0f64..5.0, lam in -2.0f64..2.0) {
            let p = p().with_lambda(lam);
            let s = PhaseState::new(r, th, pr, pt);
            let g = hamiltonian_gradient(&s, &p).unwrap();
            let f = equations_of_motion(&s, &p).unwrap();
            let dot: f64 = g.iter().zip(&f).map(|(a, b)| a * b).sum();
            let ng = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nf = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(dot.abs() <= 1e-12 * ng * nf + 1e-300);
        }

        #[test]
        fn hessian_matches_gradient_differences(r in 0.95f64..6.0, th in -3.0f64..3.0, pr in -3.0f64..3.0, pt in -3.0f64..3.0) {
            let p = p().with_lambda(0.3);
            let y = [r, th, pr, pt];
            let hess = hessian_unchecked(&y, &p);
            let h = 1e-6;
            for k in 0..4 {
                let mut yp = y;
                let mut ym = y;
                yp[k] += h;
                ym[k] -= h;
                let gp = hamiltonian_gradient(&PhaseState::from_slice(&yp), &p).unwrap();
                let gm = hamiltonian_gradient(&PhaseState::from_slice(&ym), &p).unwrap();
                for i in 0..4 {
                    let fd = (gp[i] - gm[i]) / (2.0 * h);
                    prop_assert!((hess[i][k] - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "{i}{k}: {} vs {fd}", hess[i][k]);
                }
            }
        }
    }
}
