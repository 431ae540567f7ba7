//! Configuration projection of a generator orbit as a graph `r = R(θ)` and its
//! quadrature nodes.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::integrate::{Propagator, Sampling};
use crate::model::{equations_of_motion, potential_total, PhaseState};
use crate::porbit::{shot_tolerances, OrbitKind, PeriodicOrbit};
use crate::real::wrap_signed;
use crate::Params;

use super::DsError;

/// Quadrature node on the curve, placed by Cartesian arclength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveNode {
    pub s: f64,
    /// Quadrature weight in arclength.
    pub weight: f64,
    pub r: f64,
    pub theta: f64,
    /// `U(r, θ)`.
    pub u: f64,
    /// `dq/ds` in `(r, θ)` components.
    pub tangent: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigCurve {
    pub closed: bool,
    /// Symmetry angle of an open arc (the brake orbit's midpoint); 0 for closed curves.
    pub centre: f64,
    pub length: f64,
    pub nodes: Vec<CurveNode>,
    /// `(θ − centre, R, dR/dθ)` sorted by the first entry.
    table: Vec<[f64; 3]>,
}

const FINE: usize = 16;

impl ConfigCurve {
    /// Nodes at `s = L(1 − cos φ)/2` with midpoint `φ` for an arc (clustered at the
    /// turning points, where the fiber degenerates), uniform in `s` for a closed curve.
    pub fn from_orbit(orbit: &PeriodicOrbit, n: usize, p: &Params) -> Result<Self, DsError> {
        let tol = shot_tolerances();
        let closed = orbit.kind == OrbitKind::Rotating;
        let (start, span) = if closed {
            (orbit.point, orbit.period)
        } else {
            let tp = Propagator::new(p).tolerances(tol).run(&orbit.point, 0.25 * orbit.period)?.trajectory.final_state;
            (tp, 0.5 * orbit.period)
        };
        let nf = FINE * n;
        let h = span / nf as f64;
        let run = Propagator::new(p).tolerances(tol).sampling(Sampling::Uniform(h)).run(&start, span)?;
        let mut fine: Vec<(f64, PhaseState<f64>)> = run.trajectory.samples.into_iter().filter(|(t, _)| *t <= span).collect();
        if fine.first().map_or(true, |(t, _)| *t > 0.0) {
            fine.insert(0, (0.0, start));
        }
        if fine.last().map_or(true, |(t, _)| *t < span - 1e-9 * span) {
            fine.push((span, run.trajectory.final_state));
        }
        let speed = |s: &PhaseState<f64>| -> Result<(f64, [f64; 4]), DsError> {
            let f = equations_of_motion(s, p)?;
            Ok(((f[0] * f[0] + s.r * s.r * f[1] * f[1]).sqrt(), f))
        };
        let mut arc = vec![0.0];
        let mut prev = speed(&fine[0].1)?.0;
        for w in fine.windows(2) {
            let v = speed(&w[1].1)?.0;
            arc.push(arc.last().unwrap() + 0.5 * (w[1].0 - w[0].0) * (prev + v));
            prev = v;
        }
        let length = *arc.last().unwrap();

        let mut nodes = Vec::with_capacity(n);
        for k in 0..n {
            let (s, weight) = if closed {
                (length * k as f64 / n as f64, length / n as f64)
            } else {
                let phi = PI * (k as f64 + 0.5) / n as f64;
                (0.5 * length * (1.0 - phi.cos()), PI / n as f64 * 0.5 * length * phi.sin())
            };
            let j = arc.partition_point(|&a| a <= s).clamp(1, arc.len() - 1) - 1;
            let (t0, x0) = fine[j];
            let t = t0 + (s - arc[j]) / (arc[j + 1] - arc[j]) * (fine[j + 1].0 - t0);
            let x = if t > t0 { Propagator::new(p).tolerances(tol).run(&x0, t - t0)?.trajectory.final_state } else { x0 };
            let (v, f) = speed(&x)?;
            nodes.push(CurveNode {
                s,
                weight,
                r: x.r,
                theta: wrap_signed(x.theta),
                u: potential_total(x.r, x.theta, p)?,
                tangent: [f[0] / v, f[1] / v],
            });
        }

        let centre = if closed { 0.0 } else { wrap_signed(orbit.point.theta) };
        let mut table: Vec<[f64; 3]> = Vec::with_capacity(n + 2);
        for nd in &nodes {
            table.push([wrap_signed(nd.theta - centre), nd.r, nd.tangent[0] / nd.tangent[1]]);
        }
        if !closed {
            // Turning points: the slope is the limit of the velocity direction.
            for tp in [start, run.trajectory.final_state] {
                let dt = 1e-5 * span;
                let near = Propagator::new(p).tolerances(tol).run(&tp, dt)?.trajectory.final_state;
                let f = equations_of_motion(&near, p)?;
                table.push([wrap_signed(tp.theta - centre), tp.r, f[0] / f[1]]);
            }
        }
        table.sort_by(|a, b| a[0].total_cmp(&b[0]));
        if table.windows(2).any(|w| w[1][0] <= w[0][0]) || table.iter().any(|row| !row[2].is_finite()) {
            return Err(DsError::NotAGraph);
        }
        Ok(Self { closed, centre, length, nodes, table })
    }

    /// `(R(θ), R′(θ))`. Off the `θ`-extent of an arc the graph is continued linearly and
    /// periodically between its ends, so the event function stays continuous.
    pub fn radius(&self, theta: f64) -> (f64, f64) {
        let d = wrap_signed(theta - self.centre);
        let tb = &self.table;
        let (first, last) = (tb[0], tb[tb.len() - 1]);
        if d < first[0] || d > last[0] {
            let x = if d < first[0] { d + TAU } else { d };
            let h = first[0] + TAU - last[0];
            if self.closed {
                return hermite(&last, &[first[0] + TAU, first[1], first[2]], x);
            }
            let slope = (first[1] - last[1]) / h;
            return (last[1] + slope * (x - last[0]), slope);
        }
        let i = tb.partition_point(|row| row[0] <= d).clamp(1, tb.len() - 1);
        hermite(&tb[i - 1], &tb[i], d)
    }

    pub fn covers(&self, theta: f64) -> bool {
        if self.closed {
            return true;
        }
        let d = wrap_signed(theta - self.centre);
        d >= self.table[0][0] - 1e-9 && d <= self.table[self.table.len() - 1][0] + 1e-9
    }

    /// `θ`-extent `(min, max)` relative to the centre.
    pub fn extent(&self) -> (f64, f64) {
        (self.table[0][0], self.table[self.table.len() - 1][0])
    }

    pub fn rotated(&self, by: f64) -> Self {
        let mut c = self.clone();
        if !c.closed {
            c.centre = wrap_signed(c.centre + by);
        } else {
            // A closed curve is a graph over the whole circle; rotate its table.
            for row in &mut c.table {
                row[0] = wrap_signed(row[0] + by);
            }
            c.table.sort_by(|a, b| a[0].total_cmp(&b[0]));
        }
        for n in &mut c.nodes {
            n.theta = wrap_signed(n.theta + by);
        }
        c
    }
}

fn hermite(a: &[f64; 3], b: &[f64; 3], x: f64) -> (f64, f64) {
    let h = b[0] - a[0];
    let t = (x - a[0]) / h;
    let (t2, t3) = (t * t, t * t * t);
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * a[1] + (t3 - 2.0 * t2 + t) * h * a[2] + (-2.0 * t3 + 3.0 * t2) * b[1] + (t3 - t2) * h * b[2];
    let dv = ((6.0 * t2 - 6.0 * t) * a[1] + (3.0 * t2 - 4.0 * t + 1.0) * h * a[2] + (-6.0 * t2 + 6.0 * t) * b[1] + (3.0 * t2 - 2.0 * t) * h * b[2]) / h;
    (v, dv)
}
