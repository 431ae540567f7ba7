//! First-return map of the outward middle annulus.

use serde::{Deserialize, Serialize};

use crate::integrate::{Direction, EventSpec, Propagator, TerminalReason, Tolerances};
use crate::Params;

use super::gamma::annulus_point;
use super::{Surfaces, TransportError, R_TERMINAL};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum ReturnOutcome {
    Image { theta: f64, p_theta: f64, t: f64, retried: bool },
    Escaped { t: f64, retried: bool },
    /// No return within `t_max` (or the trajectory left through the cutoff).
    Captured { retried: bool },
}

impl ReturnOutcome {
    pub fn retried(&self) -> bool {
        match *self {
            ReturnOutcome::Image { retried, .. } | ReturnOutcome::Escaped { retried, .. } | ReturnOutcome::Captured { retried } => {
                retried
            }
        }
    }
}

/// `P(θ, p_θ)`: next outward crossing of the middle surface, `r = 15`, or nothing by
/// `t_max`. A tangency along the way is retried once with tolerances tightened tenfold.
pub fn return_map_p(
    theta: f64,
    p_theta: f64,
    surfaces: &Surfaces,
    t_max: f64,
    tol: Tolerances,
    p: &Params,
) -> Result<ReturnOutcome, TransportError> {
    let ds = surfaces.middle.as_ref().ok_or(TransportError::MissingSurface("middle"))?;
    let start = annulus_point(ds, theta, p_theta, p)
        .ok_or_else(|| TransportError::Invalid(format!("({theta}, {p_theta}) is not on the outward middle annulus")))?;
    let events = vec![
        ds.event(Direction::Increasing).terminal(),
        EventSpec::radius(R_TERMINAL, Direction::Increasing).terminal(),
    ];
    let mut retried = false;
    for tol in [tol, tol.scaled(0.1)] {
        let run = Propagator::new(p).tolerances(tol).events(events.clone()).run(&start, t_max)?;
        if run.log.records.iter().any(|r| r.event == 0 && r.grazing) && !retried {
            retried = true;
            continue;
        }
        if let Some(rec) = run.log.records.iter().find(|r| r.event == 0 && r.sign > 0) {
            return Ok(ReturnOutcome::Image { theta: rec.state.theta, p_theta: rec.state.p_theta, t: rec.t, retried });
        }
        return Ok(match run.trajectory.terminal_reason {
            TerminalReason::RTerminal => ReturnOutcome::Escaped { t: run.trajectory.t_final, retried },
            _ => ReturnOutcome::Captured { retried },
        });
    }
    unreachable!("the second pass always returns")
}
