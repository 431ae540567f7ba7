use anyhow::{bail, Context, Result};
use roaming::divsurf::{flux as ds_flux, write_flux_table, DividingSurface, FluxRow};
use roaming::porbit::{
    continue_family, detect_collisions, seed_b, seed_inner, seed_middle, seed_outer, write_family_csv, Family, StepControl,
    ANCHOR_ENERGY,
};
use roaming::transport::{SurfaceId, Surfaces};
use roaming::Params;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cache::Cache;
use crate::output::Ctx;
use crate::FamilyArg;

/// Tolerance in `(r, p_r)` for matching a fold or branch end against another family.
const COLLISION_TOL: f64 = 0.05;

fn one_family(ctx: &Ctx, tag: FamilyArg, range: (f64, f64), e_seed: f64) -> Result<Family> {
    let p = ctx.cfg.params;
    let ctl = StepControl::default();
    let key = Cache::key("porbit", "family", &(format!("{tag:?}"), &p, range, e_seed, &ctl))?;
    ctx.cache.get_or(&key, || {
        let seed = match tag {
            FamilyArg::Inner => seed_inner(e_seed, &p),
            FamilyArg::Outer => seed_outer(e_seed, &p),
            FamilyArg::Middle => seed_middle(e_seed, &p),
            FamilyArg::B => seed_b(e_seed, &p),
            FamilyArg::All => unreachable!("expanded by the caller"),
        }
        .with_context(|| format!("seeding the {tag:?} family at E = {e_seed}"))?;
        Ok(continue_family(&seed, range, &ctl, &p)?)
    })
}

#[derive(Serialize)]
struct BifRow {
    family: String,
    energy: f64,
    kind: &'static str,
    bracket: (f64, f64),
    wide: bool,
    reduced: bool,
    partner: Option<String>,
}

pub fn family(ctx: &mut Ctx, tag: FamilyArg, from: f64, to: f64, seed_energy: Option<f64>) -> Result<Value> {
    if from >= to {
        bail!("empty energy range [{from}, {to}]");
    }
    let e_seed = seed_energy.unwrap_or_else(|| ANCHOR_ENERGY.clamp(from, to));
    let tags = match tag {
        FamilyArg::All => vec![FamilyArg::Inner, FamilyArg::Middle, FamilyArg::Outer, FamilyArg::B],
        t => vec![t],
    };
    let mut families = Vec::new();
    for t in tags {
        families.push(one_family(ctx, t, (from, to), e_seed)?);
    }
    if families.len() > 1 {
        detect_collisions(&mut families, COLLISION_TOL);
    }
    let stem = match tag {
        FamilyArg::All => "all".to_string(),
        _ => families[0].tag.label(),
    };
    write_family_csv(&families, ctx.create(&format!("family_{stem}.csv"))?)?;
    let mut bifs = Vec::new();
    let mut summary = Vec::new();
    for f in &families {
        for b in &f.bifurcations {
            bifs.push(BifRow {
                family: f.tag.label(),
                energy: b.energy,
                kind: b.kind.as_str(),
                bracket: b.bracket,
                wide: b.wide,
                reduced: b.reduced,
                partner: b.partner.map(|t| t.label()),
            });
        }
        let (lo, hi) = f.energies().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(e), b.max(e)));
        if let Some(s) = &f.stall {
            ctx.flag(format!("family {} stopped early (last good E = {:.6}): {s}", f.tag.label(), f.orbits.last().map_or(f64::NAN, |o| o.energy)));
        }
        let hyperbolic = f.orbits.iter().filter(|o| o.residue < 0.0).count();
        summary.push(json!({
            "family": f.tag.label(),
            "orbits": f.orbits.len(),
            "energy_range": [lo, hi],
            "hyperbolic": hyperbolic,
            "stall": f.stall,
        }));
    }
    ctx.write_json(&format!("bifurcations_{stem}.json"), &bifs)?;
    Ok(json!({ "families": summary, "bifurcations": bifs }))
}

fn surface_summary(ds: &DividingSurface) -> Value {
    let f = ds_flux(ds);
    let g = &ds.generators[0];
    json!({
        "topology": ds.topology,
        "generator": { "r": g.point.r, "p_theta": g.point.p_theta, "period": g.period, "action": g.action, "residue": g.residue },
        "flux": f.action,
        "quadrature": f.quadrature,
        "relative_difference": f.relative_difference,
        "admits_local_recrossings": ds.admits_local_recrossings,
    })
}

pub fn ds(ctx: &mut Ctx, e: f64) -> Result<Value> {
    let p = ctx.cfg.params;
    let s = Surfaces::build(e, &p)?;
    let mut out = serde_json::Map::new();
    for id in [SurfaceId::InnerPlus, SurfaceId::InnerMinus, SurfaceId::Middle, SurfaceId::Outer] {
        match s.get(id) {
            Some(ds) => {
                ds.write_csv(ctx.create(&format!("ds_{}.csv", id.as_str()))?)?;
                if !ds_flux(ds).agrees() {
                    ctx.flag(format!("{} surface flux and action disagree", id.as_str()));
                }
                out.insert(id.as_str().into(), surface_summary(ds));
            }
            None => {
                out.insert(id.as_str().into(), Value::Null);
            }
        }
    }
    Ok(json!({ "energy": e, "surfaces": out, "inner_chart": s.chart.is_some() }))
}

fn flux_row(e: f64, p: &Params) -> Result<(FluxRow, Vec<String>)> {
    let s = Surfaces::build(e, p)?;
    let mut bad = Vec::new();
    let mut checked = |name: &str, ds: &DividingSurface| {
        let f = ds_flux(ds);
        if !f.agrees() {
            bad.push(format!("E = {e}: {name} flux {} vs quadrature {}", f.action, f.quadrature));
        }
        f.action
    };
    let inner = 2.0 * checked("inner", &s.inner_plus);
    let middle = s.middle.as_ref().map(|d| checked("middle", d));
    let outer = s.outer.as_ref().map(|d| checked("outer", d));
    Ok((FluxRow { energy: e, inner, middle, outer }, bad))
}

pub fn flux(ctx: &mut Ctx, energies: Vec<f64>) -> Result<Value> {
    let energies = if energies.is_empty() { ctx.cfg.energies.clone() } else { energies };
    let p = ctx.cfg.params;
    let mut rows = Vec::new();
    for e in energies {
        let (row, bad) = flux_row(e, &p)?;
        for b in bad {
            ctx.flag(b);
        }
        rows.push(row);
    }
    write_flux_table(&rows, ctx.create("flux.csv")?)?;
    // Linear interpolation of the first sign change of inner − outer.
    let crossover = rows.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        let da = a.inner - a.outer?;
        let db = b.inner - b.outer?;
        (da * db < 0.0).then(|| a.energy + (b.energy - a.energy) * da / (da - db))
    });
    Ok(json!({ "rows": rows, "inner_outer_crossover": crossover }))
}
