use super::potential::total_unchecked;
use super::{ModelError, ModelParams};
use crate::real::Real;

const SCAN_POINTS: usize = 6000;
const R_MAX: f64 = 1000.0;

fn bisect<S: Real>(mut a: S, mut b: S, f: impl Fn(S) -> S) -> S {
    // Bisect down to adjacent floats so that |U − E| is at rounding level, not just |Δr| ≤ 1e-10.
    let mut fa = f(a);
    for _ in 0..200 {
        let m = S::lit(0.5) * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let fm = f(m);
        if fm == S::zero() {
            return m;
        }
        if (fm < S::zero()) == (fa < S::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    S::lit(0.5) * (a + b)
}

/// Golden-section minimum of `f` on `[a, b]`.
fn golden_min<S: Real>(mut a: S, mut b: S, f: impl Fn(S) -> S) -> S {
    let g = S::lit(0.618_033_988_749_895);
    for _ in 0..120 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if f(x1) < f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    S::lit(0.5) * (a + b)
}

/// All radii `r ≥ r_cut` with `U(r, θ) = E`, ascending.
///
/// Tangential contacts (a local minimum of `U` at exactly `E`) are reported once.
pub fn hill_roots<S: Real>(e: S, theta: S, p: &ModelParams<S>) -> Vec<S> {
    let f = |r: S| total_unchecked(r, theta, p) - e;
    let lo = p.r_cut.as_f64().ln();
    let hi = R_MAX.ln();
    let rs: Vec<S> = (0..SCAN_POINTS)
        .map(|i| S::lit((lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64).exp()))
        .collect();
    let fs: Vec<S> = rs.iter().map(|&r| f(r)).collect();
    let mut roots = Vec::new();
    if fs[0] == S::zero() {
        roots.push(rs[0]);
    }
    let touch = S::lit(1e-9).max(S::epsilon() * S::lit(1e3) * (S::one() + e.abs()));
    for i in 1..SCAN_POINTS {
        let (a, b) = (fs[i - 1], fs[i]);
        if b == S::zero() {
            roots.push(rs[i]);
        } else if a != S::zero() && (a < S::zero()) != (b < S::zero()) {
            roots.push(bisect(rs[i - 1], rs[i], f));
        } else if i + 1 < SCAN_POINTS && b > S::zero() && b <= a && b <= fs[i + 1] && b < S::lit(1e-3) {
            let rm = golden_min(rs[i - 1], rs[i + 1], f);
            if f(rm).abs() <= touch {
                roots.push(rm);
            }
        }
    }
    roots
}

/// Per-angle boundary radii of the Hill region `{U ≤ E}`.
pub fn hill_boundary<S: Real>(e: S, theta_grid: &[S], p: &ModelParams<S>) -> Result<Vec<Vec<S>>, ModelError> {
    let umin = total_unchecked(p.re, S::zero(), p);
    let slack = S::lit(1e-9).max(S::epsilon() * S::lit(1e3)) * (S::one() + umin.abs());
    if e < umin - slack {
        return Err(ModelError::EnergyTooLow { e: e.as_f64() });
    }
    Ok(theta_grid.iter().map(|&t| hill_roots(e, t, p)).collect())
}
