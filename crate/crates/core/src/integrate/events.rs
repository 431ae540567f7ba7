use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::PhaseState;
use crate::real::Real;

/// A smooth scalar function on phase space whose zero set is an event surface.
pub trait SurfaceFunction<S>: Send + Sync {
    fn value(&self, s: &PhaseState<S>) -> S;
    /// `(∂g/∂r, ∂g/∂θ, ∂g/∂p_r, ∂g/∂p_θ)`.
    fn gradient(&self, s: &PhaseState<S>) -> [S; 4];
    /// Extra acceptance test at a located zero (for surfaces defined on a patch).
    fn accept(&self, _s: &PhaseState<S>) -> bool {
        true
    }
}

#[derive(Clone)]
pub enum EventKind<S> {
    /// `θ ≡ θ₀ (mod 2π)`, detected through `sin(θ − θ₀)` with `cos(θ − θ₀) > 0`.
    /// Increasing means `θ̇ > 0`, i.e. the sign of `p_θ` when `λ = 0`.
    AngleSection { theta0: S },
    /// `r = r₀`; increasing means `p_r > 0`.
    Radius { r0: S },
    /// Crossing of a dividing surface.
    Surface(Arc<dyn SurfaceFunction<S>>),
    Custom(Arc<dyn SurfaceFunction<S>>),
}

impl<S: fmt::Debug> fmt::Debug for EventKind<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AngleSection { theta0 } => write!(f, "AngleSection({theta0:?})"),
            Self::Radius { r0 } => write!(f, "Radius({r0:?})"),
            Self::Surface(_) => write!(f, "Surface"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
    Both,
}

impl Direction {
    fn admits(self, sign: i8) -> bool {
        match self {
            Self::Increasing => sign > 0,
            Self::Decreasing => sign < 0,
            Self::Both => true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EventSpec<S> {
    pub kind: EventKind<S>,
    pub direction: Direction,
    pub terminal: bool,
    /// Integration stops with `EventQuota` once this many crossings were recorded.
    pub max_count: Option<usize>,
}

impl<S: Real> EventSpec<S> {
    pub fn new(kind: EventKind<S>, direction: Direction) -> Self {
        Self { kind, direction, terminal: false, max_count: None }
    }

    pub fn angle(theta0: S, direction: Direction) -> Self {
        Self::new(EventKind::AngleSection { theta0 }, direction)
    }

    pub fn radius(r0: S, direction: Direction) -> Self {
        Self::new(EventKind::Radius { r0 }, direction)
    }

    pub fn surface(f: Arc<dyn SurfaceFunction<S>>, direction: Direction) -> Self {
        Self::new(EventKind::Surface(f), direction)
    }

    pub fn custom(f: Arc<dyn SurfaceFunction<S>>, direction: Direction) -> Self {
        Self::new(EventKind::Custom(f), direction)
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }

    pub fn max_count(mut self, n: usize) -> Self {
        self.max_count = Some(n);
        self
    }

    pub(crate) fn value(&self, s: &PhaseState<S>) -> S {
        match &self.kind {
            EventKind::AngleSection { theta0 } => (s.theta - *theta0).sin(),
            EventKind::Radius { r0 } => s.r - *r0,
            EventKind::Surface(f) | EventKind::Custom(f) => f.value(s),
        }
    }

    /// `dg/dt` along the flow vector `f`.
    pub(crate) fn rate(&self, s: &PhaseState<S>, f: &[S]) -> S {
        match &self.kind {
            EventKind::AngleSection { theta0 } => (s.theta - *theta0).cos() * f[1],
            EventKind::Radius { .. } => f[0],
            EventKind::Surface(g) | EventKind::Custom(g) => {
                let d = g.gradient(s);
                d[0] * f[0] + d[1] * f[1] + d[2] * f[2] + d[3] * f[3]
            }
        }
    }

    pub(crate) fn accept(&self, s: &PhaseState<S>) -> bool {
        match &self.kind {
            EventKind::AngleSection { theta0 } => (s.theta - *theta0).cos() > S::zero(),
            EventKind::Radius { .. } => true,
            EventKind::Surface(g) | EventKind::Custom(g) => g.accept(s),
        }
    }

    pub(crate) fn admits(&self, sign: i8) -> bool {
        self.direction.admits(sign)
    }

    pub(crate) fn is_radius(&self) -> bool {
        matches!(self.kind, EventKind::Radius { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct EventRecord<S> {
    /// Index into the event list passed to the integrator.
    pub event: usize,
    pub t: S,
    pub state: PhaseState<S>,
    /// `+1` if the event function increases through zero, `−1` otherwise, `0` for grazing.
    pub sign: i8,
    pub grazing: bool,
}

/// Ordered events of one trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct EventLog<S> {
    pub records: Vec<EventRecord<S>>,
}

impl<S: Real> EventLog<S> {
    /// Proper crossings of event `i`.
    pub fn crossings(&self, i: usize) -> impl Iterator<Item = &EventRecord<S>> {
        self.records.iter().filter(move |r| r.event == i && !r.grazing)
    }

    pub fn count(&self, i: usize) -> usize {
        self.crossings(i).count()
    }

    pub fn count_signed(&self, i: usize, sign: i8) -> usize {
        self.crossings(i).filter(|r| r.sign == sign).count()
    }
}

/// Modified regula falsi for a bracketed sign change of `g` on `[a, b]`.
pub(crate) fn illinois<S: Real>(mut a: S, mut b: S, mut ga: S, mut gb: S, tol: S, g: impl Fn(S) -> S) -> S {
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut c = (a * gb - b * ga) / (gb - ga);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = S::lit(0.5) * (a + b);
        }
        let gc = g(c);
        if gc == S::zero() {
            return c;
        }
        if (gc < S::zero()) == (gb < S::zero()) {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= S::lit(0.5);
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= S::lit(0.5);
            }
            side = 1;
        }
    }
    if ga.abs() < gb.abs() {
        a
    } else {
        b
    }
}

/// Golden-section search for the minimum of `g` on `[a, b]`.
pub(crate) fn golden<S: Real>(mut a: S, mut b: S, g: impl Fn(S) -> S) -> S {
    let k = S::lit(0.618_033_988_749_895);
    let mut x1 = b - k * (b - a);
    let mut x2 = a + k * (b - a);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..80 {
        if g1 < g2 {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - k * (b - a);
            g1 = g(x1);
        } else {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + k * (b - a);
            g2 = g(x2);
        }
    }
    S::lit(0.5) * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn illinois_finds_root() {
        let r = illinois(0.0f64, 2.0, -2.0, 2.0, 1e-14, |x| x * x - 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn golden_finds_minimum() {
        let m = golden(0.0f64, 3.0, |x| (x - 1.3) * (x - 1.3));
        assert!((m - 1.3).abs() < 1e-7);
    }

    #[test]
    fn directions() {
        assert!(Direction::Both.admits(-1));
        assert!(!Direction::Increasing.admits(-1));
        assert!(Direction::Decreasing.admits(-1));
    }
}
