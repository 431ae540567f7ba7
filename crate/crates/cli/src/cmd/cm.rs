use anyhow::Result;
use roaming::cmrep::{classify_fixed_r_surface, write_shells_csv, CmMap, MapKind};
use roaming::integrate::{Propagator, Sampling};
use roaming::porbit::shot_tolerances;
use roaming::transport::{SurfaceId, Surfaces};
use serde_json::{json, Value};

use crate::output::Ctx;

/// Curve nodes and fiber angles sampled per dividing surface.
const DS_NODES: usize = 64;
const DS_FIBER: usize = 32;
const ORBIT_SAMPLES: f64 = 512.0;

pub fn cm(ctx: &mut Ctx, e: f64, radii: &[f64], shift: bool, overlay: bool) -> Result<Value> {
    let p = ctx.cfg.params;
    let spec = ctx.cfg.cm.clone();
    let map = CmMap::for_energy(e, &p)?.with_shift(shift || spec.shift);
    let mut shells = Vec::new();
    let mut labels = Vec::new();
    for &r in radii {
        let topo = classify_fixed_r_surface(r, e, &p)?;
        let below = map.r_e.is_some_and(|re| r < re);
        labels.push(json!({ "r": r, "topology": topo.as_str(), "below_r_e": below }));
        shells.push((r, topo, map.shell(r, spec.n_theta, spec.n_phi, &p)?));
    }
    write_shells_csv(&shells, ctx.create("cm_shells.csv")?)?;

    let mut overlays = serde_json::Map::new();
    if overlay {
        match Surfaces::build(e, &p) {
            Ok(s) => {
                let mut w = csv::Writer::from_writer(ctx.create("cm_ds_overlay.csv")?);
                w.write_record(["surface", "r", "theta", "P_r", "P_theta"])?;
                let mut o = csv::Writer::from_writer(ctx.create("cm_orbit_overlay.csv")?);
                o.write_record(["orbit", "t", "r", "theta", "P_r", "P_theta"])?;
                for id in [SurfaceId::InnerPlus, SurfaceId::InnerMinus, SurfaceId::Middle, SurfaceId::Outer] {
                    let Some(ds) = s.get(id) else { continue };
                    let n = ds.curve.nodes.len();
                    let mut count = 0;
                    for k in (0..n).step_by((n / DS_NODES).max(1)) {
                        for j in 0..DS_FIBER {
                            let x = ds.point(k, std::f64::consts::TAU * j as f64 / DS_FIBER as f64);
                            if let Ok(q) = map.map_any(&x, &p) {
                                count += 1;
                                w.write_record([id.as_str().to_string(), x.r.to_string(), q.theta.to_string(), q.p_r.to_string(), q.p_theta.to_string()])?;
                            }
                        }
                    }
                    overlays.insert(id.as_str().into(), json!({ "topology": ds.topology, "points": count }));
                    for (g, orbit) in ds.generators.iter().enumerate() {
                        let run = Propagator::new(&p)
                            .tolerances(shot_tolerances())
                            .sampling(Sampling::Uniform(orbit.period / ORBIT_SAMPLES))
                            .run(&orbit.point, orbit.period)?;
                        let label = format!("{}:{g}", id.as_str());
                        for (t, x) in &run.trajectory.samples {
                            if let Ok(q) = map.map_any(x, &p) {
                                o.write_record([label.clone(), t.to_string(), x.r.to_string(), q.theta.to_string(), q.p_r.to_string(), q.p_theta.to_string()])?;
                            }
                        }
                    }
                }
                w.flush()?;
                o.flush()?;
            }
            Err(err) => ctx.flag(format!("no dividing-surface overlay at E = {e}: {err}")),
        }
    }
    Ok(json!({
        "energy": e,
        "map": match map.kind { MapKind::Toric => "toric", MapKind::Extended => "extended" },
        "r_e": map.r_e,
        "shift": map.shift,
        "shells": labels,
        "overlays": overlays,
    }))
}
