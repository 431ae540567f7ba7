use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use roaming::divsurf::InnerDSChart;
use roaming::integrate::EventRecord;
use roaming::model::PhaseState;
use roaming::transport::{
    classify_trajectory, grow_manifold, manifold_section, residence_raster, return_map_p, rotation_raster, CellStatus,
    Classification, GammaSet, Grid, ManifoldKind, Occurrence, RasterSection, ReturnOutcome, SectionCurve, Side,
    SurfaceId, Surfaces, TrajectoryClass,
};
use roaming::Params;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cache::Cache;
use crate::output::Ctx;
use crate::{KindArg, SurfaceArg};

/// Largest `p_σ` at `σ = 0` for which the chart has an outward point.
fn chart_p_max(chart: &InnerDSChart, p: &Params) -> f64 {
    let mut hi = 0.0;
    while chart.outward_point(0.0, hi + 0.05, p).is_some() && hi < 100.0 {
        hi += 0.05;
    }
    hi + 0.05
}

fn chart_box<'a>(s: &'a Surfaces, p: &Params) -> Result<(&'a InnerDSChart, (f64, f64), (f64, f64))> {
    let chart = s.chart.as_ref().context("no inner-surface chart at this energy")?;
    let (lo, hi) = s.inner_plus.curve.extent();
    let pm = chart_p_max(chart, p);
    Ok((chart, (lo, hi), (-pm, pm)))
}

fn range(v: &[f64], cfg: Option<(f64, f64)>, default: (f64, f64)) -> (f64, f64) {
    match v {
        [a, b] => (*a, *b),
        _ => cfg.unwrap_or(default),
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn raster(ctx: &mut Ctx, surface: SurfaceArg, kind: KindArg, e: f64, n: Option<usize>, xr: &[f64], yr: &[f64]) -> Result<Value> {
    let p = ctx.cfg.params;
    let n = n.unwrap_or(ctx.cfg.raster.n);
    let (section, default_x, default_y) = match surface {
        SurfaceArg::InnerDs => {
            let s = Surfaces::build(e, &p)?;
            let (_, (lo, hi), y) = chart_box(&s, &p)?;
            let half = lo.abs().min(hi);
            (RasterSection::InnerDs, (-half, half), y)
        }
        SurfaceArg::Theta0 => (RasterSection::ThetaZero, (1.0, 8.0), (-4.0, 4.0)),
    };
    let grid = Grid::new(range(xr, ctx.cfg.raster.x_range, default_x), range(yr, ctx.cfg.raster.y_range, default_y), n, n);
    let (t_max, tol) = (ctx.cfg.t_max, ctx.cfg.tolerances);
    let res = match kind {
        KindArg::Residence => residence_raster(section, grid, e, t_max, tol, &p)?,
        KindArg::Rotation => rotation_raster(section, grid, e, t_max, tol, &p)?,
    };
    let stem = format!(
        "raster_{}_{}_E{e}",
        match surface {
            SurfaceArg::InnerDs => "inner-ds",
            SurfaceArg::Theta0 => "theta0",
        },
        match kind {
            KindArg::Residence => "residence",
            KindArg::Rotation => "rotation",
        }
    );
    res.write_csv(ctx.create(&format!("{stem}.csv"))?)?;
    res.write_sidecar(ctx.create(&format!("{stem}.json"))?)?;
    let failed = res.count(CellStatus::Failed);
    if failed > 0 {
        ctx.flag(format!("{failed} cells failed to integrate"));
    }
    let counts: serde_json::Map<String, Value> = [CellStatus::Done, CellStatus::Censored, CellStatus::Cutoff, CellStatus::Infeasible, CellStatus::Failed]
        .iter()
        .map(|c| (c.as_str().to_string(), json!(res.count(*c))))
        .collect();
    Ok(json!({
        "energy": e,
        "grid": grid,
        "counts": counts,
        "max": res.max_value(),
        "median": median(res.finite_values().collect()),
    }))
}

/// Sections of `Wᵘ⁺(Γⁱ₊)` (first) and `Wˢ⁻(Γᵒ±)` (last) with the outward middle annulus.
fn gamma_curves(ctx: &Ctx, s: &Surfaces, e: f64, seeds: usize, budget: usize) -> Result<(SectionCurve, Vec<SectionCurve>)> {
    let p = ctx.cfg.params;
    let m = &ctx.cfg.manifolds;
    let (t_max, tol) = (ctx.cfg.t_max, ctx.cfg.tolerances);
    let key = Cache::key("transport", "gamma", &(&p, e, seeds, budget, m.epsilon, m.gap, t_max, &tol))?;
    ctx.cache.get_or(&key, || {
        let gi = &s.inner_plus.generators[0];
        let mut bu = grow_manifold(gi, ManifoldKind::Unstable, Side::Plus, seeds, m.epsilon, budget, &p)?;
        let cu = manifold_section(&mut bu, s, SurfaceId::Middle, true, Occurrence::First, m.gap, t_max, tol, &p)?;
        let mut cs = Vec::new();
        for o in &s.outer.as_ref().context("no outer surface at this energy")?.generators {
            let mut b = grow_manifold(o, ManifoldKind::Stable, Side::Minus, seeds, m.epsilon, budget, &p)?;
            cs.push(manifold_section(&mut b, s, SurfaceId::Middle, true, Occurrence::Last, m.gap, t_max, tol, &p)?);
        }
        Ok((cu, cs))
    })
}

pub fn manifolds(ctx: &mut Ctx, e: f64, seeds: Option<usize>, budget: Option<usize>) -> Result<Value> {
    let p = ctx.cfg.params;
    let seeds = seeds.unwrap_or(ctx.cfg.manifolds.seeds);
    let budget = budget.unwrap_or(ctx.cfg.manifolds.budget);
    let s = Surfaces::build(e, &p)?;
    if s.middle.is_none() || s.outer.is_none() {
        bail!("the middle and outer surfaces are needed (E = {e})");
    }
    let (cu, cs) = gamma_curves(ctx, &s, e, seeds, budget)?;
    cu.write_csv(ctx.create("gamma_u_i.csv")?)?;
    for (k, c) in cs.iter().enumerate() {
        c.write_csv(ctx.create(&format!("gamma_s_o_{}.csv", if k == 0 { "plus" } else { "minus" }))?)?;
    }
    for (name, c) in std::iter::once(("u+ i", &cu)).chain(cs.iter().map(|c| ("s- o", c))) {
        if c.exhausted {
            ctx.flag(format!("refinement budget exhausted on {name}"));
        }
        if !c.closed() {
            ctx.flag(format!("section curve of {name} is not closed ({} missing seeds)", c.missing.len()));
        }
    }
    let gu = GammaSet::new("u+ i", vec![cu]);
    let gs = GammaSet::new("s- o", cs);

    // Membership on a grid covering both sets.
    let ng = ctx.cfg.manifolds.membership_grid;
    let (a, b) = gu.p_theta_range();
    let (c, d) = gs.p_theta_range();
    let (lo, hi) = (a.min(c), b.max(d));
    let mut w = csv::Writer::from_writer(ctx.create("membership.csv")?);
    w.write_record(["theta", "p_theta", "in_u_i", "in_s_o"])?;
    let (mut both, mut u_only, mut in_u) = (0usize, 0usize, 0usize);
    for j in 0..ng {
        let pt = lo + (hi - lo) * (j as f64 + 0.5) / ng as f64;
        for i in 0..ng {
            let th = std::f64::consts::TAU * (i as f64 + 0.5) / ng as f64;
            let (mu, ms) = (gu.contains(th, pt), gs.contains(th, pt));
            let flag = |m: Option<bool>| m.map_or(String::new(), |b| u8::from(b).to_string());
            w.write_record([format!("{th:.8}"), format!("{pt:.8}"), flag(mu), flag(ms)])?;
            if mu == Some(true) {
                in_u += 1;
                match ms {
                    Some(true) => both += 1,
                    Some(false) => u_only += 1,
                    None => {}
                }
            }
        }
    }
    w.flush()?;

    // Where the stable branches of the outer orbits meet the inner surfaces.
    let mut hits = csv::Writer::from_writer(ctx.create("inner_hits.csv")?);
    hits.write_record(["orbit", "surface", "phase", "theta", "p_theta", "t"])?;
    let mut n_hits = 0;
    let m = ctx.cfg.manifolds.clone();
    for (k, o) in s.outer.as_ref().unwrap().generators.iter().enumerate() {
        let mut br = grow_manifold(o, ManifoldKind::Stable, Side::Minus, seeds, m.epsilon, 0, &p)?;
        for id in [SurfaceId::InnerPlus, SurfaceId::InnerMinus] {
            let c = manifold_section(&mut br, &s, id, true, Occurrence::Last, m.gap, ctx.cfg.t_max, ctx.cfg.tolerances, &p)?;
            for q in &c.points {
                n_hits += 1;
                hits.write_record([
                    if k == 0 { "o+" } else { "o-" }.to_string(),
                    id.as_str().to_string(),
                    q.phase.to_string(),
                    q.theta.to_string(),
                    q.p_theta.to_string(),
                    q.t.to_string(),
                ])?;
            }
        }
    }
    hits.flush()?;
    Ok(json!({
        "energy": e,
        "usable": gu.usable() && gs.usable(),
        "grid_points_in_u_i": in_u,
        "in_u_i_and_s_o": both,
        "in_u_i_not_s_o": u_only,
        "u_i_subset_of_s_o": u_only == 0,
        "outer_stable_inner_hits": n_hits,
    }))
}

#[derive(Serialize)]
struct TrajectoryRecord<'a> {
    index: usize,
    start: PhaseState<f64>,
    class: &'static str,
    inner_plus: [usize; 2],
    inner_minus: [usize; 2],
    middle: [usize; 2],
    outer: [usize; 2],
    started_outside_middle: bool,
    terminal: roaming::integrate::TerminalReason,
    t_final: f64,
    grazing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    log: Option<&'a [EventRecord<f64>]>,
}

pub fn classify(ctx: &mut Ctx, e: f64, grid: Option<usize>, random: Option<usize>, states: Option<&Path>, with_log: bool) -> Result<Value> {
    let p = ctx.cfg.params;
    let s = Surfaces::build(e, &p)?;
    let starts: Vec<PhaseState<f64>> = if let Some(path) = states {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).context("states file must be a JSON list of {r, theta, p_r, p_theta}")?
    } else {
        let (chart, (lo, hi), (plo, phi)) = chart_box(&s, &p)?;
        let pts: Vec<(f64, f64)> = match grid {
            Some(n) => (0..n * n)
                .map(|k| {
                    let (i, j) = (k % n, k / n);
                    (lo + (hi - lo) * (i as f64 + 0.5) / n as f64, plo + (phi - plo) * (j as f64 + 0.5) / n as f64)
                })
                .collect(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.classify.rng_seed);
                let n = random.unwrap_or(ctx.cfg.classify.samples);
                let mut v = Vec::with_capacity(n);
                let mut tries = 0;
                while v.len() < n && tries < 100 * n {
                    tries += 1;
                    let q = (rng.random_range(lo..hi), rng.random_range(plo..phi));
                    if chart.outward_point(q.0, q.1, &p).is_some() {
                        v.push(q);
                    }
                }
                v
            }
        };
        pts.iter().filter_map(|&(a, b)| chart.outward_point(a, b, &p)).collect()
    };
    if starts.is_empty() {
        bail!("no feasible initial conditions");
    }
    let (t_max, tol) = (ctx.cfg.t_max, ctx.cfg.tolerances);
    let results: Vec<Result<Classification, _>> = starts.par_iter().map(|x| classify_trajectory(x, &s, t_max, tol, &p)).collect();
    let mut counts = serde_json::Map::new();
    for c in [
        TrajectoryClass::Direct,
        TrajectoryClass::Roaming,
        TrajectoryClass::Isomerising,
        TrajectoryClass::NondissociativeRoaming,
        TrajectoryClass::Trapped,
        TrajectoryClass::Censored,
    ] {
        counts.insert(c.as_str().into(), json!(0));
    }
    let mut records = Vec::new();
    let mut failed = 0usize;
    let pair = |c: roaming::transport::Crossings| [c.outward, c.inward];
    for (k, r) in results.iter().enumerate() {
        match r {
            Ok(c) => {
                *counts.get_mut(c.class.as_str()).unwrap() = json!(counts[c.class.as_str()].as_u64().unwrap() + 1);
                records.push(TrajectoryRecord {
                    index: k,
                    start: starts[k],
                    class: c.class.as_str(),
                    inner_plus: pair(c.inner_plus),
                    inner_minus: pair(c.inner_minus),
                    middle: pair(c.middle),
                    outer: pair(c.outer),
                    started_outside_middle: c.started_outside_middle,
                    terminal: c.terminal,
                    t_final: c.t_final,
                    grazing: c.grazing,
                    log: with_log.then_some(c.log.records.as_slice()),
                });
            }
            Err(_) => failed += 1,
        }
    }
    ctx.write_json("classify.json", &records)?;
    let n = records.len();
    let censored = counts["censored"].as_u64().unwrap_or(0) as usize;
    if failed > 0 {
        ctx.flag(format!("{failed} trajectories failed to integrate"));
    }
    if censored > 0 {
        ctx.flag(format!("{censored} of {n} trajectories censored at t_max = {t_max}"));
    }
    let roaming = counts["roaming"].as_u64().unwrap_or(0) as f64;
    Ok(json!({
        "energy": e,
        "samples": n,
        "failed": failed,
        "counts": counts,
        "roaming_fraction": roaming / n.max(1) as f64,
        "censored_fraction": censored as f64 / n.max(1) as f64,
    }))
}

pub fn return_map(ctx: &mut Ctx, e: f64, theta: f64, p_theta: f64, iterations: usize) -> Result<Value> {
    let p = ctx.cfg.params;
    let s = Surfaces::build(e, &p)?;
    let mut q = (theta, p_theta);
    let mut out: Vec<ReturnOutcome> = Vec::new();
    for _ in 0..iterations {
        let o = return_map_p(q.0, q.1, &s, ctx.cfg.t_max, ctx.cfg.tolerances, &p)?;
        out.push(o);
        match o {
            ReturnOutcome::Image { theta, p_theta, .. } => q = (theta, p_theta),
            _ => break,
        }
    }
    let mut w = csv::Writer::from_writer(ctx.create("return_map.csv")?);
    w.write_record(["k", "outcome", "theta", "p_theta", "t"])?;
    w.write_record(["0".into(), "start".into(), theta.to_string(), p_theta.to_string(), String::new()])?;
    for (k, o) in out.iter().enumerate() {
        let row = match *o {
            ReturnOutcome::Image { theta, p_theta, t, .. } => ["image".into(), theta.to_string(), p_theta.to_string(), t.to_string()],
            ReturnOutcome::Escaped { t, .. } => ["escaped".into(), String::new(), String::new(), t.to_string()],
            ReturnOutcome::Captured { .. } => ["captured".into(), String::new(), String::new(), String::new()],
        };
        w.write_record(std::iter::once((k + 1).to_string()).chain(row))?;
    }
    w.flush()?;
    if out.iter().any(|o| o.retried()) {
        ctx.flag("a grazing crossing forced a retry with tighter tolerances");
    }
    Ok(json!({ "energy": e, "start": [theta, p_theta], "iterates": out }))
}
