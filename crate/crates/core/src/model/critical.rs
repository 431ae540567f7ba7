use serde::{Deserialize, Serialize};

use super::potential::jet_unchecked;
use super::ModelParams;
use crate::real::{wrap_angle, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CriticalLabel {
    #[serde(rename = "q0+")]
    Q0Plus,
    #[serde(rename = "q0-")]
    Q0Minus,
    #[serde(rename = "q1+")]
    Q1Plus,
    #[serde(rename = "q1-")]
    Q1Minus,
    #[serde(rename = "q~1+")]
    Q1TildePlus,
    #[serde(rename = "q~1-")]
    Q1TildeMinus,
    #[serde(rename = "q2+")]
    Q2Plus,
    #[serde(rename = "q2-")]
    Q2Minus,
    #[serde(rename = "other")]
    Other,
}

impl CriticalLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Q0Plus => "q0+",
            Self::Q0Minus => "q0-",
            Self::Q1Plus => "q1+",
            Self::Q1Minus => "q1-",
            Self::Q1TildePlus => "q~1+",
            Self::Q1TildeMinus => "q~1-",
            Self::Q2Plus => "q2+",
            Self::Q2Minus => "q2-",
            Self::Other => "other",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub r: f64,
    /// In `[0, 2π)`.
    pub theta: f64,
    pub energy: f64,
    /// Number of negative eigenvalues of the configuration Hessian.
    pub index: u8,
    pub label: CriticalLabel,
}

const GRID: usize = 40;
const R_MAX_SEED: f64 = 6.0;
const MERGE_TOL: f64 = 1e-8;

/// Damped Newton on `∇U = 0`. Returns the converged point or `None`.
fn newton<S: Real>(mut r: S, mut th: S, p: &ModelParams<S>) -> Option<(S, S)> {
    let gtol = S::lit(1e-11);
    let stol = S::lit(1e-12).max(S::epsilon() * S::lit(100.0));
    let r_hi = S::lit(20.0);
    for _ in 0..100 {
        let j = jet_unchecked(r, th, p);
        let g2 = j.u_r * j.u_r + j.u_th * j.u_th;
        if g2.sqrt() < gtol {
            return Some((r, th));
        }
        let det = j.u_rr * j.u_thth - j.u_rth * j.u_rth;
        if det.abs() < S::lit(1e-14) {
            return None;
        }
        let dr = -(j.u_thth * j.u_r - j.u_rth * j.u_th) / det;
        let dt = -(-j.u_rth * j.u_r + j.u_rr * j.u_th) / det;
        let size = dr.abs() + dt.abs();
        if size < stol * (S::one() + r) {
            return (r + dr < r_hi).then_some((r + dr, th + dt));
        }
        let mut lam = S::one();
        let mut accepted = false;
        for _ in 0..30 {
            let rn = r + lam * dr;
            let tn = th + lam * dt;
            if rn >= p.r_cut && rn < r_hi {
                let jn = jet_unchecked(rn, tn, p);
                if jn.u_r * jn.u_r + jn.u_th * jn.u_th < g2 {
                    r = rn;
                    th = tn;
                    accepted = true;
                    break;
                }
            }
            lam *= S::lit(0.5);
        }
        if !accepted {
            // Rounding floor of the gradient: accept if the Newton step is already tiny.
            return (size < S::lit(1e3) * stol * (S::one() + r)).then_some((r, th));
        }
    }
    None
}

fn label(index: u8, r: f64, theta: f64) -> CriticalLabel {
    use std::f64::consts::PI;
    let upper = theta < PI;
    let on_axis = (theta.sin()).abs() < 1e-6;
    match (index, on_axis) {
        (0, true) => {
            if theta.cos() > 0.0 {
                CriticalLabel::Q0Plus
            } else {
                CriticalLabel::Q0Minus
            }
        }
        (1, false) if r > 2.5 => {
            if upper {
                CriticalLabel::Q1Plus
            } else {
                CriticalLabel::Q1Minus
            }
        }
        (1, false) => {
            if upper {
                CriticalLabel::Q1TildePlus
            } else {
                CriticalLabel::Q1TildeMinus
            }
        }
        (2, false) => {
            if upper {
                CriticalLabel::Q2Plus
            } else {
                CriticalLabel::Q2Minus
            }
        }
        _ => CriticalLabel::Other,
    }
}

/// Locates all critical points of `U` in `r ≥ r_cut` by Newton from a seed grid
/// over `[r_cut, 6] × [0, π)`; partners in `[π, 2π)` follow from `θ → θ + π`.
///
/// Results are sorted by energy, then angle.
pub fn find_critical_points<S: Real>(p: &ModelParams<S>) -> Vec<CriticalPoint> {
    let mut found: Vec<(f64, f64)> = Vec::new();
    let pi = std::f64::consts::PI;
    let rc = p.r_cut.as_f64();
    let merge = MERGE_TOL.max(S::epsilon().as_f64() * 1e4);
    for i in 0..GRID {
        let r0 = rc + (R_MAX_SEED - rc) * (i as f64 + 0.5) / GRID as f64;
        for k in 0..GRID {
            let t0 = pi * k as f64 / GRID as f64;
            let Some((r, th)) = newton(S::lit(r0), S::lit(t0), p) else {
                continue;
            };
            let (r, th) = (r.as_f64(), wrap_angle(th.as_f64()) % pi);
            let dup = |&(a, b): &(f64, f64)| {
                let dth = (b - th).abs();
                (a - r).abs() < merge && dth.min(pi - dth) < merge
            };
            if !found.iter().any(dup) {
                found.push((r, th));
            }
        }
    }
    let mut out = Vec::new();
    for (r, th) in found {
        for t in [th, th + pi] {
            let j = jet_unchecked(S::lit(r), S::lit(t), p);
            let (a, b, c) = (j.u_rr.as_f64(), j.u_rth.as_f64(), j.u_thth.as_f64());
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            let index = [mean - rad, mean + rad].iter().filter(|&&l| l < 0.0).count() as u8;
            let cp = CriticalPoint {
                r,
                theta: wrap_angle(t),
                energy: j.u.as_f64(),
                index,
                label: label(index, r, wrap_angle(t)),
            };
            let dup = out.iter().any(|o: &CriticalPoint| {
                let dth = (o.theta - cp.theta).abs();
                (o.r - cp.r).abs() < merge && dth.min(2.0 * pi - dth) < merge
            });
            if !dup {
                out.push(cp);
            }
        }
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.theta.total_cmp(&b.theta)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn eight_points() {
        let cps = find_critical_points(&ModelParams::<f64>::default());
        assert_eq!(cps.len(), 8, "{cps:#?}");
        let e: Vec<f64> = cps.iter().map(|c| c.energy).collect();
        assert!((e[0] + 47.0).abs() < 1e-9 && (e[1] + 47.0).abs() < 1e-9);
        assert!((e[2] + 0.632).abs() < 1e-3);
        assert!((e[4] - 8.0).abs() < 1e-9);
        assert!((e[6] - 22.274).abs() < 1e-3);
        let q2 = cps.iter().find(|c| c.label == CriticalLabel::Q2Plus).unwrap();
        assert_eq!(q2.index, 2);
        assert!((q2.theta - FRAC_PI_2).abs() < 1e-9);
        assert!((q2.r - 1.625).abs() < 1e-3);
        let q1 = cps.iter().find(|c| c.label == CriticalLabel::Q1Minus).unwrap();
        assert!((q1.r - 3.4516).abs() < 1e-3 && (q1.theta - 3.0 * FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn flat_rotor_has_only_radial_structure() {
        let p = ModelParams::<f64> { ue: 0.0, ..Default::default() };
        let cps = find_critical_points(&p);
        assert!(cps.iter().all(|c| c.index == 0 || c.label == CriticalLabel::Other));
        assert!(cps.len() < 8);
    }

    #[test]
    fn single_precision_agrees() {
        let a = find_critical_points(&ModelParams::<f32>::default());
        assert_eq!(a.len(), 8);
        assert!((a[6].energy - 22.274).abs() < 1e-2);
    }
}
