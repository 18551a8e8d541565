//! Precision schedule: how many significand bits each iteration runs with.
//!
//! The width is chosen so the rounding errors of one Newton step stay below the
//! keep-central budget: unit roundoff phi(mu) suffices, where phi decreases
//! polynomially in both the distance to convergence (mu -> 0) and the distance
//! from the start (mu large). Precision demand therefore peaks at the two ends
//! of a run and relaxes in the middle.

use crate::roundoff::{RoundingContext, MAX_BITS, MIN_BITS};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("schedule requires {needed} significand bits at mu = {mu}, beyond the supported {MAX_BITS}")]
    OutOfRange { needed: u32, mu: f64 },
}

/// How the working precision is chosen each iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrecisionMode {
    /// Follow the schedule phi(mu) exactly.
    Scheduled,
    /// Run with a fixed unit roundoff; report exhaustion once the schedule
    /// demands more than this.
    Fixed(f64),
}

/// Fixed problem-size data entering the schedule.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleDims {
    /// Blocks of the embedding cone (base blocks + 2).
    pub r_full: usize,
    /// Variable count of the embedding.
    pub n_var: usize,
    /// Row count of the embedding.
    pub m_rows: usize,
}

/// Unit roundoff the analysis asks for at centrality parameter mu:
///   phi(mu) = mu^{7/2} / (c r n^{5/2} (2 r mu + 1)^{11/2}).
pub fn phi(mu: f64, c: f64, dims: ScheduleDims) -> f64 {
    let r = dims.r_full as f64;
    let n = dims.n_var as f64;
    mu.powf(3.5) / (c * r * n.powf(2.5) * (2.0 * r * mu + 1.0).powf(5.5))
}

/// Significand width for unit roundoff u (at most u, i.e. p = ceil(log2(1/u))),
/// also capping u at 1/4 so at least two bits are always present.
fn bits_for(u: f64) -> u32 {
    let u = u.min(0.25);
    (-u.log2()).ceil() as u32
}

/// Working context for one iteration in scheduled mode.
pub fn scheduled_context(
    mu: f64,
    c: f64,
    dims: ScheduleDims,
) -> Result<RoundingContext, ScheduleError> {
    let needed = bits_for(phi(mu, c, dims));
    if needed > MAX_BITS {
        return Err(ScheduleError::OutOfRange { needed, mu });
    }
    Ok(RoundingContext::with_bits(needed.max(MIN_BITS)).expect("clamped to range"))
}

/// Context used while forming the starting point, before any mu exists:
/// u = 1 / (c r^7 (m + n)^{5/2}).
pub fn initial_context(c: f64, dims: ScheduleDims) -> RoundingContext {
    let r = dims.r_full as f64;
    let mn = (dims.m_rows + dims.n_var) as f64;
    let u = 1.0 / (c * r.powi(7) * mn.powf(2.5));
    RoundingContext::from_unit_roundoff(u.min(0.25))
}
