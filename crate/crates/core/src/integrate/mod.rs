//! Adaptive high-order integration of the reduced flow with dense output, event
//! localization, and optional co-integration of the action and the monodromy matrix.

mod dop853;
mod events;
mod tableau;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{eom_unchecked, hamiltonian_unchecked, hessian_unchecked, ModelError, ModelParams, PhaseState};
use crate::real::Real;
use dop853::{Dense, Dop853, StepFailure};
pub use events::{Direction, EventKind, EventLog, EventRecord, EventSpec, SurfaceFunction};
use events::{golden, illinois};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("energy drift bound {bound:e} cannot be held at t = {t}")]
    DriftBound { t: f64, bound: f64 },
    #[error("step budget of {0} exhausted")]
    MaxSteps(usize),
    #[error("zero integration span")]
    EmptySpan,
    #[error("initial state is not finite")]
    NonFinite,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
    /// Energy drift bound relative to `max(1, |E|)`; `None` disables the guard.
    pub drift_rel: Option<f64>,
    pub max_steps: usize,
    /// Width of the time bracket at which event localization stops.
    pub event_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-12,
            h_max: 1.0,
            h_min: 1e-12,
            drift_rel: Some(1e-8),
            max_steps: 50_000_000,
            event_tol: 1e-12,
        }
    }
}

impl Tolerances {
    /// Looser settings for large sweeps where only event ordering matters.
    pub fn sweep() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, drift_rel: Some(1e-7), ..Self::default() }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self { rtol: self.rtol * factor, atol: self.atol * factor, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    TimeLimit,
    /// A terminal radius event fired (the `r = 15` dissociation criterion).
    RTerminal,
    Cutoff,
    EventQuota,
    /// Some other terminal event fired.
    Event,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sampling<S> {
    /// Every accepted step.
    Steps,
    /// Start and end only.
    Endpoints,
    /// Dense output on a uniform time grid with this spacing.
    Uniform(S),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct Trajectory<S> {
    pub samples: Vec<(S, PhaseState<S>)>,
    /// `max |H(t) − H(0)|` over accepted steps.
    pub energy_drift: S,
    pub energy: S,
    pub terminal_reason: TerminalReason,
    pub t_final: S,
    pub final_state: PhaseState<S>,
    pub steps: usize,
}

/// Base point together with the linearized flow `M(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariationalState<S> {
    pub base: PhaseState<S>,
    pub m: [[S; 4]; 4],
}

impl<S: Real> VariationalState<S> {
    pub fn det(&self) -> S {
        det4(&self.m)
    }

    /// `max |(MᵀJM − J)_{ij}|`.
    pub fn symplectic_defect(&self) -> S {
        symplectic_defect(&self.m)
    }
}

pub fn det4<S: Real>(m: &[[S; 4]; 4]) -> S {
    let mut a = *m;
    let mut det = S::one();
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        if a[p][c] == S::zero() {
            return S::zero();
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..4 {
            let f = a[r][c] / a[c][c];
            for k in c..4 {
                let v = a[c][k];
                a[r][k] -= f * v;
            }
        }
    }
    det
}

pub fn symplectic_defect<S: Real>(m: &[[S; 4]; 4]) -> S {
    // J = [[0, I], [−I, 0]] in (r, θ, p_r, p_θ) order.
    let j = |i: usize, k: usize| -> S {
        if k == i + 2 {
            S::one()
        } else if i == k + 2 {
            -S::one()
        } else {
            S::zero()
        }
    };
    let mut worst = S::zero();
    for a in 0..4 {
        for b in 0..4 {
            let mut s = S::zero();
            for i in 0..4 {
                for k in 0..4 {
                    s += m[i][a] * j(i, k) * m[k][b];
                }
            }
            worst = worst.max((s - j(a, b)).abs());
        }
    }
    worst
}

/// Everything a single propagation produced.
#[derive(Clone, Debug)]
pub struct Run<S> {
    pub trajectory: Trajectory<S>,
    pub log: EventLog<S>,
    /// `∫ (p_r ṙ + p_θ θ̇) dt`, zero unless requested.
    pub action: S,
    pub monodromy: Option<[[S; 4]; 4]>,
}

/// Configurable integrator front end.
#[derive(Clone, Debug)]
pub struct Propagator<'a, S> {
    params: &'a ModelParams<S>,
    tol: Tolerances,
    events: Vec<EventSpec<S>>,
    sampling: Sampling<S>,
    action: bool,
}

const SIGN_NONE: i8 = 0;

struct Tracker {
    sign: i8,
    count: usize,
}

fn sgn<S: Real>(x: S) -> i8 {
    if x > S::zero() {
        1
    } else if x < S::zero() {
        -1
    } else {
        SIGN_NONE
    }
}

/// Right-hand side for the base flow plus optional variational block (`N ≥ 20`)
/// and action (last slot when `N` is 5 or 21).
#[inline]
fn flow<S: Real, const N: usize>(p: &ModelParams<S>, y: &[S; N], dy: &mut [S; N]) {
    eom_unchecked(&y[..4], p, &mut dy[..4]);
    if N >= 20 {
        let h = hessian_unchecked(&y[..4], p);
        // JH: first two rows are H rows 2, 3; last two are −H rows 0, 1.
        let jh = [h[2], h[3], h[0].map(|v| -v), h[1].map(|v| -v)];
        for i in 0..4 {
            for k in 0..4 {
                let mut acc = S::zero();
                for l in 0..4 {
                    acc += jh[i][l] * y[4 + 4 * l + k];
                }
                dy[4 + 4 * i + k] = acc;
            }
        }
    }
    if N == 5 || N == 21 {
        dy[N - 1] = y[2] * dy[0] + y[3] * dy[1];
    }
}

impl<'a, S: Real> Propagator<'a, S> {
    pub fn new(params: &'a ModelParams<S>) -> Self {
        Self { params, tol: Tolerances::default(), events: Vec::new(), sampling: Sampling::Endpoints, action: false }
    }

    pub fn tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn events(mut self, events: Vec<EventSpec<S>>) -> Self {
        self.events = events;
        self
    }

    pub fn sampling(mut self, sampling: Sampling<S>) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_action(mut self, on: bool) -> Self {
        self.action = on;
        self
    }

    /// Integrates from `t = 0` to `t_end` (negative for backward time).
    pub fn run(&self, s0: &PhaseState<S>, t_end: S) -> Result<Run<S>, IntegrateError> {
        let base = s0.to_array();
        if self.action {
            let y0: [S; 5] = std::array::from_fn(|i| if i < 4 { base[i] } else { S::zero() });
            self.drive(y0, t_end)
        } else {
            self.drive(base, t_end)
        }
    }

    /// As [`run`](Self::run), also propagating `M(t)` from `M(0) = Id`.
    pub fn run_variational(&self, s0: &PhaseState<S>, t_end: S) -> Result<Run<S>, IntegrateError> {
        let base = s0.to_array();
        let init = |i: usize| {
            if i < 4 {
                base[i]
            } else if i < 20 && (i - 4) % 5 == 0 {
                S::one()
            } else {
                S::zero()
            }
        };
        if self.action {
            self.drive(std::array::from_fn::<S, 21, _>(init), t_end)
        } else {
            self.drive(std::array::from_fn::<S, 20, _>(init), t_end)
        }
    }

    fn drive<const N: usize>(&self, y0: [S; N], t_end: S) -> Result<Run<S>, IntegrateError> {
        let p = self.params;
        let s0 = PhaseState::from_slice(&y0);
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite);
        }
        if s0.r < p.r_cut {
            return Err(ModelError::BelowCutoff { r: s0.r.as_f64(), r_cut: p.r_cut.as_f64() }.into());
        }
        if t_end == S::zero() {
            return Err(IntegrateError::EmptySpan);
        }
        let tol = &self.tol;
        let e0 = hamiltonian_unchecked(&y0[..4], p);
        let bound = tol.drift_rel.map(|d| S::lit(d) * S::one().max(e0.abs()));
        let mut rhs = |_t: S, y: &[S; N], dy: &mut [S; N]| flow(p, y, dy);
        let mut guard = |y: &[S; N]| match bound {
            Some(b) => (hamiltonian_unchecked(&y[..4], p) - e0).abs() <= b,
            None => true,
        };
        let mut solver = Dop853::new(
            &mut rhs,
            S::zero(),
            y0,
            t_end,
            S::lit(tol.rtol),
            S::lit(tol.atol),
            S::lit(tol.h_max),
            S::lit(tol.h_min),
        );
        let dir = if t_end > S::zero() { S::one() } else { -S::one() };

        // Built-in cutoff event sits after the user events.
        let cutoff = EventSpec::radius(p.r_cut, Direction::Decreasing);
        let n_ev = self.events.len();
        let spec = |i: usize| if i < n_ev { &self.events[i] } else { &cutoff };
        let mut trackers: Vec<Tracker> = (0..=n_ev)
            .map(|i| {
                let e = spec(i);
                let mut s = sgn(e.value(&s0));
                if s == SIGN_NONE {
                    s = sgn(e.rate(&s0, &solver.f) * dir);
                }
                Tracker { sign: s, count: 0 }
            })
            .collect();

        let mut samples = vec![(S::zero(), s0)];
        let mut log = EventLog { records: Vec::new() };
        let mut drift = S::zero();
        let mut steps = 0usize;
        let mut reason = TerminalReason::TimeLimit;
        let mut stop_at: Option<S> = None;
        let ev_tol = S::lit(tol.event_tol);
        let graze_tol = S::lit(1e-10);
        let mut next_uniform = match self.sampling {
            Sampling::Uniform(dt) => dt * dir,
            _ => S::zero(),
        };

        while solver.t != t_end {
            if steps >= tol.max_steps {
                return Err(IntegrateError::MaxSteps(steps));
            }
            solver.step(&mut rhs, t_end, &mut guard).map_err(|e| match e {
                StepFailure::Underflow => IntegrateError::StepUnderflow { t: solver.t.as_f64() },
                StepFailure::Guard => IntegrateError::DriftBound {
                    t: solver.t.as_f64(),
                    bound: bound.map(|b| b.as_f64()).unwrap_or(0.0),
                },
            })?;
            steps += 1;
            let (t0, t1) = (solver.t_old, solver.t);
            let y_a = PhaseState::from_slice(&solver.y_old);
            let y_b = PhaseState::from_slice(&solver.y);
            let mut dense: Option<Dense<S, N>> = None;

            // Candidate events inside (t0, t1]: (time, index, sign, grazing).
            let mut found: Vec<(S, usize, i8, bool)> = Vec::new();
            for (i, tr) in trackers.iter().enumerate() {
                let e = spec(i);
                let g1 = e.value(&y_b);
                let r1 = e.rate(&y_b, &solver.f) * dir;
                let mut s1 = sgn(g1);
                if s1 == SIGN_NONE {
                    s1 = sgn(r1);
                }
                if s1 == SIGN_NONE || tr.sign == SIGN_NONE {
                    continue;
                }
                let r0 = e.rate(&y_a, &solver.f_old) * dir;
                let s = S::lit(tr.sign as f64);
                let turning = s * r0 < S::zero() && s * r1 > S::zero();
                if s1 == tr.sign && !turning {
                    continue;
                }
                let d = dense.get_or_insert_with(|| solver.dense(&mut rhs)).clone();
                let g = |t: S| e.value(&PhaseState::from_slice(&d.eval(t)));
                if s1 != tr.sign {
                    let tc = illinois(t0, t1, e.value(&y_a), g1, ev_tol, &g);
                    found.push((tc, i, s1, false));
                    continue;
                }
                // Same sign at both ends but the event function turned toward zero:
                // look for a double crossing or a tangency inside the step.
                let tm = golden(t0, t1, |t| s * g(t));
                let gm = s * g(tm);
                if gm < S::zero() {
                    let ta = illinois(t0, tm, e.value(&y_a), g(tm), ev_tol, &g);
                    let tb = illinois(tm, t1, g(tm), g1, ev_tol, &g);
                    found.push((ta, i, -tr.sign, false));
                    found.push((tb, i, tr.sign, false));
                } else if gm < graze_tol {
                    found.push((tm, i, SIGN_NONE, true));
                }
            }
            found.sort_by(|a, b| (a.0 * dir).partial_cmp(&(b.0 * dir)).unwrap());

            for (tc, i, s, grazing) in found {
                let d = dense.as_ref().expect("dense output computed for events");
                let state = PhaseState::from_slice(&d.eval(tc));
                if grazing {
                    if i < n_ev {
                        log.records.push(EventRecord { event: i, t: tc, state, sign: 0, grazing: true });
                    }
                    continue;
                }
                trackers[i].sign = s;
                if i == n_ev {
                    reason = TerminalReason::Cutoff;
                    stop_at = Some(tc);
                    break;
                }
                let e = spec(i);
                if !e.accept(&state) || !e.admits(s) {
                    continue;
                }
                log.records.push(EventRecord { event: i, t: tc, state, sign: s, grazing: false });
                trackers[i].count += 1;
                if e.terminal {
                    reason = if e.is_radius() { TerminalReason::RTerminal } else { TerminalReason::Event };
                    stop_at = Some(tc);
                    break;
                }
                if e.max_count.is_some_and(|m| trackers[i].count >= m) {
                    reason = TerminalReason::EventQuota;
                    stop_at = Some(tc);
                    break;
                }
            }

            let t_stop = stop_at.unwrap_or(t1);
            match self.sampling {
                Sampling::Steps => {
                    let y = match (stop_at, &dense) {
                        (Some(ts), Some(d)) => PhaseState::from_slice(&d.eval(ts)),
                        _ => y_b,
                    };
                    samples.push((t_stop, y));
                }
                Sampling::Uniform(dt) => {
                    let d = dense.get_or_insert_with(|| solver.dense(&mut rhs));
                    while (next_uniform - t_stop) * dir <= S::zero() {
                        samples.push((next_uniform, PhaseState::from_slice(&d.eval(next_uniform))));
                        next_uniform += dt * dir;
                    }
                }
                Sampling::Endpoints => {}
            }

            let y_end: [S; N] = match (stop_at, &dense) {
                (Some(ts), Some(d)) => d.eval(ts),
                _ => solver.y,
            };
            drift = drift.max((hamiltonian_unchecked(&y_end[..4], p) - e0).abs());
            if stop_at.is_some() || solver.t == t_end {
                let fin = PhaseState::from_slice(&y_end);
                if matches!(self.sampling, Sampling::Endpoints) || samples.last().map(|s| s.0) != Some(t_stop) {
                    samples.push((t_stop, fin));
                }
                let action = if N == 5 || N == 21 { y_end[N - 1] } else { S::zero() };
                let monodromy = (N >= 20).then(|| std::array::from_fn(|i| std::array::from_fn(|k| y_end[4 + 4 * i + k])));
                return Ok(Run {
                    trajectory: Trajectory {
                        samples,
                        energy_drift: drift,
                        energy: e0,
                        terminal_reason: reason,
                        t_final: t_stop,
                        final_state: fin,
                        steps,
                    },
                    log,
                    action,
                    monodromy,
                });
            }
        }
        unreachable!("loop exits through the final-step branch")
    }
}

/// Integrates for `t_max` time units, sampling every accepted step.
pub fn integrate<S: Real>(
    state: &PhaseState<S>,
    params: &ModelParams<S>,
    t_max: S,
    tol: &Tolerances,
) -> Result<Trajectory<S>, IntegrateError> {
    Ok(Propagator::new(params).tolerances(*tol).sampling(Sampling::Steps).run(state, t_max)?.trajectory)
}

pub fn integrate_with_events<S: Real>(
    state: &PhaseState<S>,
    params: &ModelParams<S>,
    events: Vec<EventSpec<S>>,
    t_max: S,
    tol: &Tolerances,
) -> Result<(Trajectory<S>, EventLog<S>), IntegrateError> {
    let run = Propagator::new(params).tolerances(*tol).events(events).sampling(Sampling::Steps).run(state, t_max)?;
    Ok((run.trajectory, run.log))
}

/// Co-integrates the linearized flow and returns `M(T)` at the end point.
pub fn integrate_variational<S: Real>(
    state: &PhaseState<S>,
    params: &ModelParams<S>,
    t: S,
    tol: &Tolerances,
) -> Result<VariationalState<S>, IntegrateError> {
    let run = Propagator::new(params).tolerances(*tol).run_variational(state, t)?;
    Ok(VariationalState { base: run.trajectory.final_state, m: run.monodromy.expect("variational run") })
}

#[cfg(test)]
mod tests;
