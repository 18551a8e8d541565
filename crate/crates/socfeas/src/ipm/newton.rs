//! One Newton step of the embedded problem, and the two stopping tests.
//!
//! The expensive part — assembling B = H(w)^{-1/2} script_A' and solving the
//! least-squares system min ||B dy + q|| — runs entirely in the simulated
//! working precision. The cheap reconstruction that follows is done natively:
//! its rounding errors are far below the least-squares ones, and rebuilding
//! (x', t, x'', s, ...) from (x, tau, y) keeps both equality systems satisfied
//! exactly at every iterate.

use crate::barrier::{self, SfScalingBlock};
use crate::dense;
use crate::embed::{Embedding, Iterate};
use crate::roundoff::{golub_lls, LlsError, RoundingContext, SfMat, SimFloat};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("least-squares solve failed: {0}")]
    Lls(#[from] LlsError),
    #[error("step residual {residual:.3e} exceeded its centrality budget {bound:.3e}")]
    Rejected { residual: f64, bound: f64 },
}

/// Diagnostics of one accepted step.
#[derive(Debug, Clone)]
pub struct StepData {
    /// min ||B dy + q|| reported by the rounded factorization.
    pub lls_residual: f64,
    /// ||dy|| of the computed multiplier step.
    pub dy_norm: f64,
    /// Norm of the reconstruction residual r = (z+ - z) - direction.
    pub step_residual: f64,
    /// Norm of the rounded right-hand side q = -H(w)^{-1/2}(mu_bar g(x) + s).
    pub q_norm: f64,
    /// Whether the step had to be recomputed at higher precision.
    pub retried: bool,
    /// Significand bits actually used.
    pub bits_used: u32,
    /// The computed multiplier step itself, for external accuracy audits.
    pub dy: Vec<f64>,
}

fn sf_vec(v: &[f64], ctx: &RoundingContext) -> Vec<SimFloat> {
    v.iter().map(|&t| SimFloat::from_f64(t, ctx)).collect()
}

/// Rounded barrier gradient of one block: (-2 x0 / d, 2 xbar / d).
fn sf_gradient_block(x_blk: &[f64], ctx: &RoundingContext) -> Vec<SimFloat> {
    let xs = sf_vec(x_blk, ctx);
    let head = xs[0].mul(&xs[0], ctx);
    let tail = crate::roundoff::sf_dot(&xs[1..], &xs[1..], ctx);
    let d = head.sub(&tail, ctx);
    let two = SimFloat::from_f64(2.0, ctx);
    let mut g = Vec::with_capacity(xs.len());
    g.push(two.mul(&xs[0], ctx).div(&d, ctx).neg());
    for xi in &xs[1..] {
        g.push(two.mul(xi, ctx).div(&d, ctx));
    }
    g
}

/// The scaled coefficient matrix B = H(w)^{-1/2} script_A', one rounded column
/// per embedding row.
fn assemble_b(
    emb: &Embedding,
    blocks: &[SfScalingBlock],
    ctx: &RoundingContext,
) -> SfMat {
    let n_var = emb.var_dim();
    let m_rows = emb.row_dim();
    let mut b = SfMat::zeros(n_var, m_rows);
    for j in 0..m_rows {
        let col = emb.script_a().row(j);
        for (blk, range) in blocks.iter().zip(emb.cone().full().block_ranges()) {
            let seg = sf_vec(&col[range.clone()], ctx);
            for (i, v) in blk.inv_sqrt_apply(&seg, ctx).into_iter().enumerate() {
                b.set(range.start + i, j, v);
            }
        }
    }
    b
}

/// Rounded right-hand side q = -H(w)^{-1/2}(mu_bar g(x) + s), blockwise.
fn assemble_q(
    emb: &Embedding,
    z: &Iterate,
    blocks: &[SfScalingBlock],
    mu_bar: f64,
    ctx: &RoundingContext,
) -> Vec<SimFloat> {
    let mu_bar_sf = SimFloat::from_f64(mu_bar, ctx);
    let mut q = Vec::with_capacity(emb.var_dim());
    for (blk, range) in blocks.iter().zip(emb.cone().full().block_ranges()) {
        let g = sf_gradient_block(&z.x[range.clone()], ctx);
        let s = sf_vec(&z.s[range.clone()], ctx);
        let v: Vec<SimFloat> = g
            .iter()
            .zip(&s)
            .map(|(gi, si)| mu_bar_sf.mul(gi, ctx).add(si, ctx))
            .collect();
        q.extend(blk.inv_sqrt_apply(&v, ctx).into_iter().map(|t| t.neg()));
    }
    q
}

fn attempt(
    emb: &Embedding,
    z: &Iterate,
    mu_bar: f64,
    ctx: &RoundingContext,
) -> Result<(Iterate, StepData), StepError> {
    let full = emb.cone().full();
    let blocks: Vec<SfScalingBlock> = full
        .block_ranges()
        .map(|r| SfScalingBlock::build(&z.x[r.clone()], &z.s[r], ctx))
        .collect();
    let b = assemble_b(emb, &blocks, ctx);
    let q = assemble_q(emb, z, &blocks, mu_bar, ctx);
    let q_norm = dense::norm2(&q.iter().map(SimFloat::to_f64).collect::<Vec<f64>>());
    let lls = golub_lls(&b, &q, ctx)?;
    let dy = lls.solution;

    // Native reconstruction: direction = H(w)^-1 script_A' dy - (mu_bar g(s) + x).
    let at_dy = emb.script_a().t_matvec(&dy);
    let w = barrier::scaling_point(full, &z.x, &z.s);
    let h_inv = barrier::hessian_inv_apply(full, &w, &at_dy);
    let g_s = barrier::gradient(full, &z.s);
    let dir: Vec<f64> = h_inv
        .iter()
        .zip(&g_s)
        .zip(&z.x)
        .map(|((h, g), x)| h - (mu_bar * g + x))
        .collect();

    let n = emb.base_dim();
    let x_new: Vec<f64> = z
        .x_base(emb)
        .iter()
        .zip(&dir[emb.idx_x()])
        .map(|(a, d)| a + d)
        .collect();
    let tau_new = z.tau(emb) + dir[emb.idx_tau()];
    let ax_new = emb.a().matvec(&x_new);

    let mut x_vec = vec![0.0; emb.var_dim()];
    x_vec[emb.idx_x()].copy_from_slice(&x_new);
    x_vec[emb.idx_t()] = 1.0;
    x_vec[emb.idx_xp()].copy_from_slice(&x_new);
    x_vec[emb.idx_tau()] = tau_new;
    for (slot, v) in x_vec[emb.idx_xpp()].iter_mut().zip(&ax_new) {
        *slot = -v;
    }

    let y_new: Vec<f64> = z.y.iter().zip(&dy).map(|(a, b)| a + b).collect();
    let aty = emb.script_a().t_matvec(&y_new);
    let s_vec: Vec<f64> = emb.c_vec().iter().zip(&aty).map(|(c, v)| c - v).collect();

    // Reconstruction residual r = (x+ - x) - direction; zero by construction in
    // the x and tau slots, so only the rebuilt rows contribute.
    let mut r2 = 0.0;
    let rt = (1.0 - z.x[emb.idx_t()]) - dir[emb.idx_t()];
    r2 += rt * rt;
    for i in 0..n {
        let d = (x_new[i] - z.x[emb.idx_xp()][i]) - dir[emb.idx_xp()][i];
        r2 += d * d;
    }
    for (i, v) in ax_new.iter().enumerate() {
        let d = (-v - z.x[emb.idx_xpp()][i]) - dir[emb.idx_xpp()][i];
        r2 += d * d;
    }

    let data = StepData {
        lls_residual: lls.residual_norm,
        dy_norm: dense::norm2(&dy),
        step_residual: r2.sqrt(),
        q_norm,
        retried: false,
        bits_used: ctx.bits(),
        dy,
    };
    Ok((Iterate { x: x_vec, y: y_new, s: s_vec }, data))
}

/// Budget on the reconstruction residual that keeps the next iterate inside the
/// centrality neighborhood: mu / (120 r (2 r mu + 1)).
pub fn step_residual_bound(mu: f64, r_full: usize) -> f64 {
    let r = r_full as f64;
    mu / (120.0 * r * (2.0 * r * mu + 1.0))
}

/// Take one step, retrying once with 8 extra bits if the reconstruction
/// residual exceeds its centrality budget.
pub fn take_step(
    emb: &Embedding,
    z: &Iterate,
    mu: f64,
    mu_bar: f64,
    ctx: &RoundingContext,
) -> Result<(Iterate, StepData), StepError> {
    let bound = step_residual_bound(mu, emb.cone().block_count());
    let (z_new, data) = attempt(emb, z, mu_bar, ctx)?;
    if data.step_residual <= bound {
        return Ok((z_new, data));
    }
    let finer = ctx.refined(8);
    let (z_new, mut data) = attempt(emb, z, mu_bar, &finer)?;
    data.retried = true;
    if data.step_residual <= bound {
        Ok((z_new, data))
    } else {
        Err(StepError::Rejected { residual: data.step_residual, bound })
    }
}

/// Dual stopping test: every base block of s clears the rounded margin test
///   fl(s_i0 - ||sbar_i||) > fl(6 mu r).
/// Returns the native minimum margin alongside for tracing.
pub fn dual_stop(emb: &Embedding, z: &Iterate, mu: f64, ctx: &RoundingContext) -> (bool, f64) {
    let r_full = emb.cone().block_count() as f64;
    let rhs = SimFloat::from_f64(6.0 * r_full, ctx)
        .mul(&SimFloat::from_f64(mu, ctx), ctx);
    let mut fires = true;
    let mut min_margin = f64::INFINITY;
    for range in emb.cone().base().block_ranges() {
        let blk = &z.s[range];
        let s0 = SimFloat::from_f64(blk[0], ctx);
        let tail_norm = crate::roundoff::sf_norm2(&sf_vec(&blk[1..], ctx), ctx);
        let margin = s0.sub(&tail_norm, ctx);
        if margin.cmp_value(&rhs) != std::cmp::Ordering::Greater {
            fires = false;
        }
        min_margin = min_margin.min(crate::lorentz::block_margin(blk));
    }
    (fires, min_margin)
}

/// Primal stopping quantity: fl(sigma_min(Hb(x)^{-1/2} A')) where Hb is the
/// base-cone Hessian at the iterate's x block. The scaled matrix is formed and
/// triangularized in working precision; the minimal singular value of the small
/// triangle is then read off natively. Returns 0 when the rounded
/// triangularization detects rank deficiency.
pub fn primal_stop_sigma(emb: &Embedding, z: &Iterate, ctx: &RoundingContext) -> f64 {
    let base = emb.cone().base();
    // H(x)^{-1/2} is the scaling map of the pair (x, -g(x)).
    let blocks: Vec<SfScalingBlock> = base
        .block_ranges()
        .map(|r| {
            let gx = sf_gradient_block(&z.x[r.clone()], ctx);
            let neg_g: Vec<f64> = gx.iter().map(|t| t.neg().to_f64()).collect();
            SfScalingBlock::build(&z.x[r], &neg_g, ctx)
        })
        .collect();
    let m = emb.a().rows();
    let n = base.ambient_dim();
    let mut b = SfMat::zeros(n, m);
    for j in 0..m {
        let mut unit = vec![0.0; m];
        unit[j] = 1.0;
        let col = emb.a().t_matvec(&unit);
        for (blk, range) in blocks.iter().zip(base.block_ranges()) {
            let seg = sf_vec(&col[range.clone()], ctx);
            for (i, v) in blk.inv_sqrt_apply(&seg, ctx).into_iter().enumerate() {
                b.set(range.start + i, j, v);
            }
        }
    }
    let q = vec![SimFloat::zero(); n];
    match golub_lls(&b, &q, ctx) {
        Ok(lls) => lls.r_upper.sigma_min(),
        Err(_) => 0.0,
    }
}

/// Threshold the primal stop compares against: fl(3 r mu / gamma).
pub fn primal_stop_threshold(mu: f64, r_full: usize, gamma: f64, ctx: &RoundingContext) -> f64 {
    let lhs = SimFloat::from_f64(3.0 * r_full as f64, ctx)
        .mul(&SimFloat::from_f64(mu, ctx), ctx);
    lhs.div(&SimFloat::from_f64(gamma, ctx), ctx).to_f64()
}
