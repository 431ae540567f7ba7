//! Family tables as CSV.

use std::io::Write;

use super::Family;

pub const FAMILY_CSV_HEADER: [&str; 10] = ["family", "E", "r", "theta", "p_r", "p_theta", "period", "action", "residue", "stability"];

/// One row per orbit, families in the given order.
pub fn write_family_csv<W: Write>(families: &[Family], w: W) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FAMILY_CSV_HEADER)?;
    for f in families {
        for o in &f.orbits {
            out.write_record([
                o.family.label(),
                format!("{:.10}", o.energy),
                format!("{:.12}", o.point.r),
                format!("{:.12}", o.point.theta),
                format!("{:.12}", o.point.p_r),
                format!("{:.12}", o.point.p_theta),
                format!("{:.12}", o.period),
                format!("{:.12}", o.action),
                format!("{:.12e}", o.residue),
                o.stability.as_str().to_string(),
            ])?;
        }
    }
    out.flush()
}
