use std::f64::consts::TAU;

use anyhow::Result;
use roaming::model::{find_critical_points, hill_boundary};
use serde_json::{json, Value};

use crate::output::Ctx;

pub fn critical_points(ctx: &mut Ctx) -> Result<Value> {
    let cps = find_critical_points(&ctx.cfg.params);
    let mut w = csv::Writer::from_writer(ctx.create("critical_points.csv")?);
    w.write_record(["label", "r", "theta", "energy", "index"])?;
    for c in &cps {
        w.write_record([c.label.as_str().to_string(), format!("{:.10}", c.r), format!("{:.10}", c.theta), format!("{:.10}", c.energy), c.index.to_string()])?;
    }
    w.flush()?;
    ctx.write_json("critical_points.json", &cps)?;
    if cps.len() != 8 {
        ctx.flag(format!("found {} critical points, expected 8", cps.len()));
    }
    Ok(json!({ "count": cps.len(), "points": cps }))
}

pub fn hill(ctx: &mut Ctx, e: f64, n_theta: usize) -> Result<Value> {
    let thetas: Vec<f64> = (0..n_theta).map(|k| TAU * k as f64 / n_theta as f64).collect();
    let roots = hill_boundary(e, &thetas, &ctx.cfg.params)?;
    let mut w = csv::Writer::from_writer(ctx.create("hill.csv")?);
    w.write_record(["theta", "root", "r"])?;
    for (t, rs) in thetas.iter().zip(&roots) {
        for (k, r) in rs.iter().enumerate() {
            w.write_record([format!("{t:.10}"), k.to_string(), format!("{r:.10}")])?;
        }
    }
    w.flush()?;
    let max_roots = roots.iter().map(Vec::len).max().unwrap_or(0);
    let open = roots.iter().filter(|r| r.is_empty()).count();
    Ok(json!({ "energy": e, "angles": n_theta, "max_roots_per_ray": max_roots, "rays_without_boundary": open }))
}
