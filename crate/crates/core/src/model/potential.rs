//! Model potential: long-range C–H part plus the hindered rotor.

use super::{ModelError, ModelParams};
use crate::real::Real;

/// Value, gradient and Hessian of `U` at one configuration point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialJet<S> {
    pub u: S,
    pub u_r: S,
    pub u_th: S,
    pub u_rr: S,
    pub u_rth: S,
    pub u_thth: S,
}

#[inline]
fn check_r<S: Real>(r: S, p: &ModelParams<S>) -> Result<(), ModelError> {
    if r >= p.r_cut {
        Ok(())
    } else {
        Err(ModelError::BelowCutoff { r: r.as_f64(), r_cut: p.r_cut.as_f64() })
    }
}

/// Radial part `U_CH` and its first two derivatives, no domain check.
#[inline]
pub(crate) fn long_range_jet<S: Real>(r: S, p: &ModelParams<S>) -> (S, S, S) {
    let six = S::lit(6.0);
    let k = p.de / (p.c1 - six);
    let a = S::lit(2.0) * (S::lit(3.0) - p.c2);
    let b = S::lit(4.0) * p.c2 - p.c1 * p.c2 + p.c1;
    let c = (p.c1 - six) * p.c2;
    let x = r / p.re;
    let e = (p.c1 * (S::one() - x)).exp();
    let ix = x.recip();
    let ix2 = ix * ix;
    let ix4 = ix2 * ix2;
    let ix6 = ix4 * ix2;
    let u = k * (a * e - b * ix6 - c * ix4);
    let du = k / p.re * (-a * p.c1 * e + six * b * ix6 * ix + S::lit(4.0) * c * ix4 * ix);
    let d2u = k / (p.re * p.re)
        * (a * p.c1 * p.c1 * e - S::lit(42.0) * b * ix6 * ix2 - S::lit(20.0) * c * ix6);
    (u, du, d2u)
}

/// Full jet of `U(r, θ)`, no domain check. Used inside the integrator.
#[inline]
pub(crate) fn jet_unchecked<S: Real>(r: S, theta: S, p: &ModelParams<S>) -> PotentialJet<S> {
    let (uc, uc_r, uc_rr) = long_range_jet(r, p);
    let two = S::lit(2.0);
    let d = r - p.re;
    let u0 = p.ue * (-p.a * d * d).exp();
    let u0_r = -two * p.a * d * u0;
    let u0_rr = (S::lit(4.0) * p.a * p.a * d * d - two * p.a) * u0;
    let (s2, c2) = (two * theta).sin_cos();
    let half = S::lit(0.5) * (S::one() - c2);
    PotentialJet {
        u: uc + u0 * half,
        u_r: uc_r + u0_r * half,
        u_th: u0 * s2,
        u_rr: uc_rr + u0_rr * half,
        u_rth: u0_r * s2,
        u_thth: two * u0 * c2,
    }
}

#[inline]
pub(crate) fn total_unchecked<S: Real>(r: S, theta: S, p: &ModelParams<S>) -> S {
    let d = r - p.re;
    let u0 = p.ue * (-p.a * d * d).exp();
    long_range_jet(r, p).0 + S::lit(0.5) * u0 * (S::one() - (S::lit(2.0) * theta).cos())
}

/// `U_CH(r)`.
pub fn potential_long_range<S: Real>(r: S, p: &ModelParams<S>) -> Result<S, ModelError> {
    check_r(r, p)?;
    Ok(long_range_jet(r, p).0)
}

/// `U_*(r, θ) = U_0(r)/2 · (1 − cos 2θ)`.
pub fn potential_hindered_rotor<S: Real>(r: S, theta: S, p: &ModelParams<S>) -> Result<S, ModelError> {
    check_r(r, p)?;
    let d = r - p.re;
    let u0 = p.ue * (-p.a * d * d).exp();
    Ok(S::lit(0.5) * u0 * (S::one() - (S::lit(2.0) * theta).cos()))
}

pub fn potential_total<S: Real>(r: S, theta: S, p: &ModelParams<S>) -> Result<S, ModelError> {
    check_r(r, p)?;
    Ok(total_unchecked(r, theta, p))
}

/// `(∂U/∂r, ∂U/∂θ)`.
pub fn potential_gradient<S: Real>(r: S, theta: S, p: &ModelParams<S>) -> Result<(S, S), ModelError> {
    check_r(r, p)?;
    let j = jet_unchecked(r, theta, p);
    Ok((j.u_r, j.u_th))
}

pub fn potential_jet<S: Real>(r: S, theta: S, p: &ModelParams<S>) -> Result<PotentialJet<S>, ModelError> {
    check_r(r, p)?;
    Ok(jet_unchecked(r, theta, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn p() -> ModelParams<f64> {
        ModelParams::default()
    }

    #[test]
    fn well_depth() {
        let u = potential_long_range(1.1, &p()).unwrap();
        assert!((u + 47.0).abs() < 1e-12);
        let bracket: f64 = -(7.37 - 6.0) * 1.61 - (4.0 * 1.61 - 7.37 * 1.61 + 7.37) + 2.0 * (3.0 - 1.61);
        assert!((bracket + 1.37).abs() < 1e-12);
    }

    #[test]
    fn rotor_peak() {
        assert_eq!(potential_hindered_rotor(2.3, 0.0, &p()).unwrap(), 0.0);
        assert!((potential_hindered_rotor(1.1, FRAC_PI_2, &p()).unwrap() - 55.0).abs() < 1e-12);
        assert!((potential_total(1.1, FRAC_PI_2, &p()).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn tail_is_r_minus_4() {
        let p = p();
        let lead = -p.c2 * p.re.powi(4) * p.de;
        for r in [50.0, 100.0, 200.0] {
            let v = potential_long_range(r, &p).unwrap() * r.powi(4);
            assert!(v < 0.0);
            assert!((v - lead).abs() / lead.abs() < 2e-3 * (50.0 / r).powi(2) + 1e-9, "{r} {v} {lead}");
        }
    }

    #[test]
    fn below_cutoff_is_an_error() {
        assert!(matches!(potential_total(0.5, 0.0, &p()), Err(ModelError::BelowCutoff { .. })));
        assert!(potential_gradient(0.899, 0.0, &p()).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let pf = ModelParams::<f32>::default();
        let u = potential_total(1.1f32, 0.0, &pf).unwrap();
        assert!((u + 47.0).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn symmetric(r in 0.9f64..20.0, th in -7.0f64..7.0) {
            let p = p();
            let u = potential_total(r, th, &p).unwrap();
            prop_assert!((u - potential_total(r, -th, &p).unwrap()).abs() <= 1e-12 * (1.0 + u.abs()));
            prop_assert!((u - potential_total(r, th + PI, &p).unwrap()).abs() <= 1e-12 * (1.0 + u.abs()));
        }

        #[test]
        fn gradient_matches_differences(r in 0.95f64..12.0, th in 0.0f64..6.3) {
            let p = p();
            let h = 1e-6;
            let (gr, gt) = potential_gradient(r, th, &p).unwrap();
            let fr = (potential_total(r + h, th, &p).unwrap() - potential_total(r - h, th, &p).unwrap()) / (2.0 * h);
            let ft = (potential_total(r, th + h, &p).unwrap() - potential_total(r, th - h, &p).unwrap()) / (2.0 * h);
            let scale = 1.0 + gr.abs().max(gt.abs());
            prop_assert!((gr - fr).abs() <= 1e-6 * scale);
            prop_assert!((gt - ft).abs() <= 1e-6 * scale);
        }

        #[test]
        fn hessian_matches_differences(r in 0.95f64..8.0, th in 0.0f64..6.3) {
            let p = p();
            let h = 1e-5;
            let j = potential_jet(r, th, &p).unwrap();
            let jp = potential_jet(r + h, th, &p).unwrap();
            let jm = potential_jet(r - h, th, &p).unwrap();
            let tp = potential_jet(r, th + h, &p).unwrap();
            let tm = potential_jet(r, th - h, &p).unwrap();
            let scale = 1.0 + j.u_rr.abs() + j.u_thth.abs();
            prop_assert!((j.u_rr - (jp.u_r - jm.u_r) / (2.0 * h)).abs() <= 1e-5 * scale);
            prop_assert!((j.u_rth - (jp.u_th - jm.u_th) / (2.0 * h)).abs() <= 1e-5 * scale);
            prop_assert!((j.u_thth - (tp.u_th - tm.u_th) / (2.0 * h)).abs() <= 1e-5 * scale);
        }
    }
}
