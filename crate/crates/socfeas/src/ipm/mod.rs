//! Short-step primal-dual interior-point solver on the self-dual embedding.
//!
//! Each iteration: pick the working precision from the schedule, test both
//! stopping rules, shrink the centrality target, and take one Newton step of
//! the scaled system (rounded least-squares solve + native reconstruction).
//! The iterate stays inside the proximity-beta neighborhood of the central
//! path throughout, which is what makes the stopping rules sound.

pub mod newton;
pub mod schedule;

use crate::barrier;
use crate::dense::{self, Mat};
use crate::embed::{self, Embedding, InstanceError, Iterate, RecoveryError};
use crate::lorentz::ConeStructure;
use crate::roundoff::RoundingContext;
use schedule::{PrecisionMode, ScheduleDims, ScheduleError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Radius beta of the central-path neighborhood the iterates live in.
pub const NEIGHBORHOOD_RADIUS: f64 = 1.0 / 15.0;
/// Per-step centrality decrement delta: mu_bar = (1 - delta/sqrt(2r)) mu.
pub const CENTERING_DECREMENT: f64 = 1.0 / 45.0;
/// Default universal constant c of the precision schedule.
pub const DEFAULT_SCHEDULE_CONSTANT: f64 = 1e6;
pub const DEFAULT_MAX_ITERATIONS: usize = 20_000;

/// The two neighborhood constants must satisfy two inequalities for the
/// one-step centrality argument to close; true for every block count >= 1
/// (embedding block count >= 3).
pub fn constants_check(r_full: usize) -> bool {
    let beta = NEIGHBORHOOD_RADIUS;
    let delta = CENTERING_DECREMENT;
    let nu_sqrt = (2.0 * r_full as f64).sqrt();
    let lhs = 7.0 * (beta * beta + delta * delta) / (1.0 - beta);
    let rhs = (1.0 - delta / nu_sqrt) * beta;
    let second = 2.0 * std::f64::consts::SQRT_2 * beta / (1.0 - beta) <= 1.0;
    lhs < rhs && second
}

/// Duality-gap parameter of an iterate: <x, s> / (2 * blocks).
pub fn mu_of(emb: &Embedding, z: &Iterate) -> f64 {
    dense::dot(&z.x, &z.s) / barrier::degree(emb.cone().full())
}

/// Distance to the mu-center measured in the local norm at x:
/// (1/mu) ||s + mu g(x)||_{H(x)^-1}.
pub fn proximity(emb: &Embedding, z: &Iterate, mu: f64) -> f64 {
    let full = emb.cone().full();
    let g = barrier::gradient(full, &z.x);
    let v: Vec<f64> = z.s.iter().zip(&g).map(|(si, gi)| si + mu * gi).collect();
    barrier::dual_local_norm(full, &z.x, &v) / mu
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Forward-accuracy parameter of the primal stopping rule, in (0, 1].
    pub margin_gamma: f64,
    /// Universal constant of the precision schedule.
    pub schedule_constant: f64,
    pub max_iterations: usize,
    pub precision: PrecisionMode,
    /// Record the per-iteration invariant measurements (slow; testing aid).
    pub collect_monitors: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            margin_gamma: 0.1,
            schedule_constant: DEFAULT_SCHEDULE_CONSTANT,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            precision: PrecisionMode::Scheduled,
            collect_monitors: false,
        }
    }
}

/// Per-iteration trace entry (written before the step is taken; the step
/// diagnostics describe the step out of this iterate).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mu: f64,
    pub mu_bar: f64,
    pub bits: u32,
    pub proximity: f64,
    pub dual_margin: f64,
    pub primal_sigma: f64,
    pub step_residual: f64,
    pub lls_residual: f64,
    pub dy_norm: f64,
    pub retried: bool,
}

/// Exact-arithmetic invariant measurements for one iterate. Raw quantities
/// only; the asserted bounds live with the tests that consume them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub iteration: usize,
    pub mu: f64,
    /// ||x|| of the base block (bounded by 1).
    pub x_base_norm: f64,
    /// max(||x''||, tau) (bounded by 2 r mu).
    pub x_aux_max: f64,
    /// ||s''|| (bounded by 1).
    pub s_aux_norm: f64,
    /// max(||s'||, t_s) (bounded by 2 r mu).
    pub s_pair_max: f64,
    /// ||s|| of the base block (bounded by 2 r mu + 1).
    pub s_base_norm: f64,
    /// |tau + eta - 2 r mu| (identically zero on the central path).
    pub tau_eta_gap: f64,
    /// min over blocks of <x_i, s_i> (at least 2 (1-beta) mu).
    pub min_block_inner: f64,
    /// min over blocks of sqrt(det x_i det s_i) (at least 2 (1-beta) mu).
    pub min_block_geomean: f64,
    /// tau itself (at least (1-beta) mu).
    pub tau: f64,
    /// ||H(w)|| (bounded by 4 (2 r mu + 1)^2 / mu).
    pub hess_w_norm: f64,
    /// ||H(w)^-1|| (bounded by (2 + 3 r mu)^2 / mu).
    pub hess_w_inv_norm: f64,
    /// ||H(w)^{-1/2}(mu_bar g(x) + s)|| (bounded by sqrt(mu)/2).
    pub q_norm: f64,
    /// sigma_max(sqrt(mu) H(w)^{-1/2} script_A') (bounded by 2 + 3 r mu).
    pub sigma_max_scaled: f64,
    /// sigma_min of the same matrix (at least mu/(6r) while mu <= 1 on
    /// primal-feasible instances).
    pub sigma_min_scaled: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Outcome {
    /// (P) is strictly feasible: x_hat is the iterate's base block, x_breve its
    /// nullspace projection satisfying A x = 0 to working accuracy.
    PrimalFeasible { x_hat: Vec<f64>, x_breve: Vec<f64> },
    /// (D) is strictly feasible: -A'y is strictly interior.
    DualFeasible { y: Vec<f64> },
    /// Fixed precision ran out; any instance needing more is at least this
    /// badly conditioned.
    PrecisionExceeded { condition_bound: f64 },
    IterationLimit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub outcome: Outcome,
    pub iterations: usize,
    pub final_mu: f64,
    pub final_proximity: f64,
    pub trace: Vec<IterationRecord>,
    pub monitors: Vec<MonitorRecord>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("newton step failed at iteration {iteration}: {source}")]
    Step {
        iteration: usize,
        source: newton::StepError,
    },
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error("iterate left the cone interior at iteration {iteration}")]
    InteriorLost { iteration: usize },
    #[error("margin parameter gamma must lie in (0, 1], got {0}")]
    BadGamma(f64),
}

/// Decide which of (P)/(D) is strictly feasible for A over the given cone.
pub fn solve(a: &Mat, cone: &ConeStructure, cfg: &SolverConfig) -> Result<SolveReport, SolveError> {
    if !(cfg.margin_gamma > 0.0 && cfg.margin_gamma <= 1.0) {
        return Err(SolveError::BadGamma(cfg.margin_gamma));
    }
    let (a_scaled, block_scales) = embed::normalize_blocks(a, cone)?;
    let emb = Embedding::build(a_scaled, cone.clone())?;
    let r_full = emb.cone().block_count();
    debug_assert!(constants_check(r_full));
    let dims = ScheduleDims {
        r_full,
        n_var: emb.var_dim(),
        m_rows: emb.row_dim(),
    };
    let c = cfg.schedule_constant;

    // Build the starting point, then round it to the start-up precision. The
    // dependent coordinates are rebuilt natively from the rounded free ones so
    // both equality systems hold exactly from the first iterate on.
    let z0 = embed::initial_point(&emb);
    let ctx0 = schedule::initial_context(c, dims);
    let mut z = round_onto_manifold(&emb, &z0, &ctx0);

    let mut trace = Vec::new();
    let mut monitors = Vec::new();
    let decay = 1.0 - CENTERING_DECREMENT / (2.0 * r_full as f64).sqrt();

    let mut outcome = Outcome::IterationLimit;
    let mut iterations = cfg.max_iterations;
    for it in 0..cfg.max_iterations {
        let mu = mu_of(&emb, &z);
        if cfg.collect_monitors {
            monitors.push(collect_monitor(&emb, &z, mu, it));
        }
        let ctx = match cfg.precision {
            PrecisionMode::Scheduled => schedule::scheduled_context(mu, c, dims)?,
            PrecisionMode::Fixed(u_fixed) => {
                if schedule::phi(mu, c, dims) < u_fixed {
                    outcome = Outcome::PrecisionExceeded {
                        condition_bound: crate::conditioning::condition_lower_bound(
                            u_fixed,
                            a.rows(),
                            cone.ambient_dim(),
                            r_full,
                            c,
                        ),
                    };
                    iterations = it;
                    break;
                }
                RoundingContext::from_unit_roundoff(u_fixed)
            }
        };

        let (dual_fires, dual_margin) = newton::dual_stop(&emb, &z, mu, &ctx);
        if dual_fires {
            outcome = Outcome::DualFeasible { y: embed::recover_dual(&emb, &z) };
            iterations = it;
            break;
        }
        let sigma = newton::primal_stop_sigma(&emb, &z, &ctx);
        if sigma >= newton::primal_stop_threshold(mu, r_full, cfg.margin_gamma, &ctx) {
            let (mut x_hat, mut x_breve) = embed::recover_primal(&emb, &z)?;
            // Undo the block normalization: columns of A were scaled by k_i, so
            // certificates scale by k_i to solve the original system.
            for (range, k) in cone.block_ranges().zip(&block_scales) {
                for i in range {
                    x_hat[i] *= k;
                    x_breve[i] *= k;
                }
            }
            outcome = Outcome::PrimalFeasible { x_hat, x_breve };
            iterations = it;
            break;
        }

        let mu_bar = decay * mu;
        let (z_next, data) = newton::take_step(&emb, &z, mu, mu_bar, &ctx)
            .map_err(|source| SolveError::Step { iteration: it, source })?;
        let full = emb.cone().full();
        if !full.is_strictly_interior(&z_next.x) || !full.is_strictly_interior(&z_next.s) {
            return Err(SolveError::InteriorLost { iteration: it });
        }
        trace.push(IterationRecord {
            iteration: it,
            mu,
            mu_bar,
            bits: data.bits_used,
            proximity: proximity(&emb, &z, mu),
            dual_margin,
            primal_sigma: sigma,
            step_residual: data.step_residual,
            lls_residual: data.lls_residual,
            dy_norm: data.dy_norm,
            retried: data.retried,
        });
        z = z_next;
    }

    let final_mu = mu_of(&emb, &z);
    Ok(SolveReport {
        outcome,
        iterations,
        final_mu,
        final_proximity: proximity(&emb, &z, final_mu),
        trace,
        monitors,
    })
}

/// Round the free coordinates (x base, tau, y) of an iterate to the context and
/// rebuild every dependent coordinate natively, restoring exact equality
/// feasibility on both sides.
fn round_onto_manifold(emb: &Embedding, z: &Iterate, ctx: &RoundingContext) -> Iterate {
    let x_base: Vec<f64> = z
        .x_base(emb)
        .iter()
        .map(|&v| crate::roundoff::round_scalar(v, ctx))
        .collect();
    let tau = crate::roundoff::round_scalar(z.tau(emb), ctx);
    let y: Vec<f64> = z.y.iter().map(|&v| crate::roundoff::round_scalar(v, ctx)).collect();

    let ax = emb.a().matvec(&x_base);
    let mut x = vec![0.0; emb.var_dim()];
    x[emb.idx_x()].copy_from_slice(&x_base);
    x[emb.idx_t()] = 1.0;
    x[emb.idx_xp()].copy_from_slice(&x_base);
    x[emb.idx_tau()] = tau;
    for (slot, v) in x[emb.idx_xpp()].iter_mut().zip(&ax) {
        *slot = -v;
    }
    let aty = emb.script_a().t_matvec(&y);
    let s: Vec<f64> = emb.c_vec().iter().zip(&aty).map(|(c, v)| c - v).collect();
    Iterate { x, y, s }
}

fn block_dense_hessian(tail: usize, w_blk: &[f64]) -> Mat {
    let cone = ConeStructure::new(vec![tail]).expect("single block");
    let len = tail + 1;
    let mut h = Mat::zeros(len, len);
    for j in 0..len {
        let mut unit = vec![0.0; len];
        unit[j] = 1.0;
        let col = barrier::hessian_apply(&cone, w_blk, &unit);
        for i in 0..len {
            h[(i, j)] = col[i];
        }
    }
    h
}

fn collect_monitor(emb: &Embedding, z: &Iterate, mu: f64, iteration: usize) -> MonitorRecord {
    let full = emb.cone().full();
    let r_full = emb.cone().block_count() as f64;
    let x_base_norm = dense::norm2(z.x_base(emb));
    let x_aux_max = dense::norm2(z.x_slack(emb)).max(z.tau(emb));
    let s_aux_norm = dense::norm2(z.s_slack(emb));
    let s_pair_max = dense::norm2(z.s_prime(emb)).max(z.t_dual(emb));
    let s_base_norm = dense::norm2(z.s_base(emb));
    let tau_eta_gap = (z.tau(emb) + z.eta(emb) - 2.0 * r_full * mu).abs();

    let mut min_block_inner = f64::INFINITY;
    let mut min_block_geomean = f64::INFINITY;
    for r in full.block_ranges() {
        let xb = &z.x[r.clone()];
        let sb = &z.s[r];
        min_block_inner = min_block_inner.min(dense::dot(xb, sb));
        let geo = (crate::lorentz::block_det(xb) * crate::lorentz::block_det(sb)).sqrt();
        min_block_geomean = min_block_geomean.min(geo);
    }

    let w = barrier::scaling_point(full, &z.x, &z.s);
    let mut hess_w_norm: f64 = 0.0;
    let mut hess_w_inv_norm: f64 = 0.0;
    for (tail, r) in full.tail_dims().iter().zip(full.block_ranges()) {
        let h = block_dense_hessian(*tail, &w[r]);
        let svs = h.singular_values();
        hess_w_norm = hess_w_norm.max(svs[0]);
        hess_w_inv_norm = hess_w_inv_norm.max(1.0 / svs[svs.len() - 1]);
    }

    // Native scaled matrix B = H(w)^{-1/2} script_A' and right-hand side.
    let blocks = barrier::scaling_blocks(full, &z.x, &z.s);
    let n_var = emb.var_dim();
    let m_rows = emb.row_dim();
    let mut b = Mat::zeros(n_var, m_rows);
    for j in 0..m_rows {
        let col = emb.script_a().row(j);
        for (blk, r) in blocks.iter().zip(full.block_ranges()) {
            for (i, v) in blk.inv_sqrt_apply(&col[r.clone()]).into_iter().enumerate() {
                b[(r.start + i, j)] = v;
            }
        }
    }
    let mu_bar = (1.0 - CENTERING_DECREMENT / (2.0 * r_full).sqrt()) * mu;
    let g = barrier::gradient(full, &z.x);
    let mut q = Vec::with_capacity(n_var);
    for (blk, r) in blocks.iter().zip(full.block_ranges()) {
        let v: Vec<f64> = g[r.clone()]
            .iter()
            .zip(&z.s[r])
            .map(|(gi, si)| mu_bar * gi + si)
            .collect();
        q.extend(blk.inv_sqrt_apply(&v));
    }
    let svs = b.singular_values();
    let scale = mu.sqrt();

    MonitorRecord {
        iteration,
        mu,
        x_base_norm,
        x_aux_max,
        s_aux_norm,
        s_pair_max,
        s_base_norm,
        tau_eta_gap,
        min_block_inner,
        min_block_geomean,
        tau: z.tau(emb),
        hess_w_norm,
        hess_w_inv_norm,
        q_norm: dense::norm2(&q),
        sigma_max_scaled: scale * svs[0],
        sigma_min_scaled: scale * svs[svs.len() - 1],
    }
}
