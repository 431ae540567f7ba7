//! Explicit Runge–Kutta 8(5,3) with a 7th-order continuous extension.

use super::tableau::{A, C, D, E3, E5, STAGES, STAGES_EXT};
use crate::real::Real;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum StepFailure {
    /// Step size fell below the minimum while trying to satisfy the tolerances.
    Underflow,
    /// The guard kept rejecting steps down to the minimum step size.
    Guard,
}

/// Coefficients converted to the working scalar.
struct Table<S> {
    c: [S; STAGES_EXT],
    a: [[S; STAGES_EXT]; STAGES_EXT],
    e3: [S; STAGES + 1],
    e5: [S; STAGES + 1],
    d: [[S; STAGES_EXT]; 4],
}

impl<S: Real> Table<S> {
    fn new() -> Self {
        Self {
            c: C.map(S::lit),
            a: A.map(|row| row.map(S::lit)),
            e3: E3.map(S::lit),
            e5: E5.map(S::lit),
            d: D.map(|row| row.map(S::lit)),
        }
    }
}

/// Continuous extension over the last accepted step.
#[derive(Clone, Debug)]
pub(crate) struct Dense<S, const N: usize> {
    pub t_old: S,
    pub h: S,
    y_old: [S; N],
    f: [[S; N]; 7],
}

impl<S: Real, const N: usize> Dense<S, N> {
    pub fn eval(&self, t: S) -> [S; N] {
        let x = (t - self.t_old) / self.h;
        let mut y = [S::zero(); N];
        for (i, fi) in self.f.iter().rev().enumerate() {
            let w = if i % 2 == 0 { x } else { S::one() - x };
            for k in 0..N {
                y[k] = (y[k] + fi[k]) * w;
            }
        }
        for k in 0..N {
            y[k] += self.y_old[k];
        }
        y
    }
}

pub(crate) struct Dop853<S, const N: usize> {
    tab: Table<S>,
    pub t: S,
    pub y: [S; N],
    pub f: [S; N],
    pub t_old: S,
    pub y_old: [S; N],
    pub f_old: [S; N],
    k: [[S; N]; STAGES_EXT],
    h_abs: S,
    h_done: S,
    dir: S,
    rtol: S,
    atol: S,
    h_min: S,
    h_max: S,
    extras_ready: bool,
    pub n_rhs: usize,
}

fn norm<S: Real, const N: usize>(v: &[S; N]) -> S {
    (v.iter().map(|&x| x * x).sum::<S>() / S::lit(N as f64)).sqrt()
}

impl<S: Real, const N: usize> Dop853<S, N> {
    pub fn new<F>(rhs: &mut F, t0: S, y0: [S; N], t_end: S, rtol: S, atol: S, h_max: S, h_min: S) -> Self
    where
        F: FnMut(S, &[S; N], &mut [S; N]),
    {
        let mut f = [S::zero(); N];
        rhs(t0, &y0, &mut f);
        let dir = if t_end >= t0 { S::one() } else { -S::one() };
        let mut s = Self {
            tab: Table::new(),
            t: t0,
            y: y0,
            f,
            t_old: t0,
            y_old: y0,
            f_old: f,
            k: [[S::zero(); N]; STAGES_EXT],
            h_abs: S::zero(),
            h_done: S::zero(),
            dir,
            rtol,
            atol,
            h_min,
            h_max,
            extras_ready: false,
            n_rhs: 1,
        };
        s.h_abs = s.initial_step(rhs, (t_end - t0).abs()).max(h_min);
        s
    }

    fn initial_step<F>(&mut self, rhs: &mut F, span: S) -> S
    where
        F: FnMut(S, &[S; N], &mut [S; N]),
    {
        if span == S::zero() {
            return S::zero();
        }
        let mut scale = [S::zero(); N];
        for i in 0..N {
            scale[i] = self.atol + self.y[i].abs() * self.rtol;
        }
        let d0 = norm::<S, N>(&std::array::from_fn(|i| self.y[i] / scale[i]));
        let d1 = norm::<S, N>(&std::array::from_fn(|i| self.f[i] / scale[i]));
        let small = S::lit(1e-5);
        let h0 = if d0 < small || d1 < small { S::lit(1e-6) } else { S::lit(0.01) * d0 / d1 };
        let h0 = h0.min(span);
        let y1: [S; N] = std::array::from_fn(|i| self.y[i] + h0 * self.dir * self.f[i]);
        let mut f1 = [S::zero(); N];
        rhs(self.t + h0 * self.dir, &y1, &mut f1);
        self.n_rhs += 1;
        let d2 = norm::<S, N>(&std::array::from_fn(|i| (f1[i] - self.f[i]) / scale[i])) / h0;
        let h1 = if d1 <= S::lit(1e-15) && d2 <= S::lit(1e-15) {
            (S::lit(1e-6)).max(h0 * S::lit(1e-3))
        } else {
            (S::lit(0.01) / d1.max(d2)).powf(S::lit(1.0 / 8.0))
        };
        (S::lit(100.0) * h0).min(h1).min(span).min(self.h_max)
    }

    /// One trial step of signed size `h`; stages land in `self.k`.
    fn attempt<F>(&mut self, rhs: &mut F, h: S) -> ([S; N], [S; N], S)
    where
        F: FnMut(S, &[S; N], &mut [S; N]),
    {
        self.k[0] = self.f;
        for s in 1..STAGES {
            let ys: [S; N] = std::array::from_fn(|i| {
                let mut acc = S::zero();
                for j in 0..s {
                    acc += self.tab.a[s][j] * self.k[j][i];
                }
                self.y[i] + h * acc
            });
            let mut ks = [S::zero(); N];
            rhs(self.t + self.tab.c[s] * h, &ys, &mut ks);
            self.k[s] = ks;
        }
        let y_new: [S; N] = std::array::from_fn(|i| {
            let mut acc = S::zero();
            for j in 0..STAGES {
                acc += self.tab.a[STAGES][j] * self.k[j][i];
            }
            self.y[i] + h * acc
        });
        let mut f_new = [S::zero(); N];
        rhs(self.t + h, &y_new, &mut f_new);
        self.k[STAGES] = f_new;
        self.n_rhs += STAGES;

        let mut e5 = S::zero();
        let mut e3 = S::zero();
        for i in 0..N {
            let sc = self.atol + self.y[i].abs().max(y_new[i].abs()) * self.rtol;
            let mut a5 = S::zero();
            let mut a3 = S::zero();
            for j in 0..=STAGES {
                a5 += self.tab.e5[j] * self.k[j][i];
                a3 += self.tab.e3[j] * self.k[j][i];
            }
            e5 += (a5 / sc) * (a5 / sc);
            e3 += (a3 / sc) * (a3 / sc);
        }
        let mut denom = e5 + S::lit(0.01) * e3;
        if denom == S::zero() {
            denom = S::one();
        }
        let err = h.abs() * e5 / (denom * S::lit(N as f64)).sqrt();
        (y_new, f_new, err)
    }

    /// Advances by one accepted step not overshooting `t_end`. `guard` may veto a step.
    pub fn step<F, G>(&mut self, rhs: &mut F, t_end: S, guard: &mut G) -> Result<(), StepFailure>
    where
        F: FnMut(S, &[S; N], &mut [S; N]),
        G: FnMut(&[S; N]) -> bool,
    {
        let remaining = (t_end - self.t).abs();
        let mut h_abs = self.h_abs.min(self.h_max);
        let mut rejected = false;
        let mut guard_hit = false;
        loop {
            if h_abs < self.h_min {
                return Err(if guard_hit { StepFailure::Guard } else { StepFailure::Underflow });
            }
            let last = h_abs >= remaining;
            let h = if last { remaining * self.dir } else { h_abs * self.dir };
            let (y_new, f_new, err) = self.attempt(rhs, h);
            let ok = err.is_finite() && y_new.iter().all(|v| v.is_finite());
            if ok && err < S::one() {
                if !guard(&y_new) {
                    guard_hit = true;
                    h_abs *= S::lit(0.5);
                    rejected = true;
                    continue;
                }
                let mut factor = if err == S::zero() {
                    S::lit(MAX_FACTOR)
                } else {
                    S::lit(MAX_FACTOR).min(S::lit(SAFETY) * err.powf(S::lit(-1.0 / 8.0)))
                };
                if rejected {
                    factor = factor.min(S::one());
                }
                self.t_old = self.t;
                self.y_old = self.y;
                self.f_old = self.f;
                self.t = if last { t_end } else { self.t + h };
                self.y = y_new;
                self.f = f_new;
                self.h_done = h;
                self.h_abs = (h_abs * factor).min(self.h_max);
                self.extras_ready = false;
                return Ok(());
            }
            let shrink = if ok {
                S::lit(MIN_FACTOR).max(S::lit(SAFETY) * err.powf(S::lit(-1.0 / 8.0)))
            } else {
                S::lit(MIN_FACTOR)
            };
            h_abs *= shrink;
            rejected = true;
        }
    }

    /// Dense output over the last accepted step. Costs three extra evaluations once per step.
    pub fn dense<F>(&mut self, rhs: &mut F) -> Dense<S, N>
    where
        F: FnMut(S, &[S; N], &mut [S; N]),
    {
        let h = self.h_done;
        if !self.extras_ready {
            for s in STAGES + 1..STAGES_EXT {
                let ys: [S; N] = std::array::from_fn(|i| {
                    let mut acc = S::zero();
                    for j in 0..s {
                        acc += self.tab.a[s][j] * self.k[j][i];
                    }
                    self.y_old[i] + h * acc
                });
                let mut ks = [S::zero(); N];
                rhs(self.t_old + self.tab.c[s] * h, &ys, &mut ks);
                self.k[s] = ks;
            }
            self.n_rhs += STAGES_EXT - STAGES - 1;
            self.extras_ready = true;
        }
        let mut f = [[S::zero(); N]; 7];
        for i in 0..N {
            let dy = self.y[i] - self.y_old[i];
            f[0][i] = dy;
            f[1][i] = h * self.f_old[i] - dy;
            f[2][i] = S::lit(2.0) * dy - h * (self.f[i] + self.f_old[i]);
            for r in 0..4 {
                let mut acc = S::zero();
                for j in 0..STAGES_EXT {
                    acc += self.tab.d[r][j] * self.k[j][i];
                }
                f[3 + r][i] = h * acc;
            }
        }
        Dense { t_old: self.t_old, h, y_old: self.y_old, f }
    }
}
