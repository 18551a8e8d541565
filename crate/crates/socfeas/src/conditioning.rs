//! Condition measures of the feasibility pair, instance generators with known
//! answers, and the conversion between available precision and certifiable
//! condition numbers.
//!
//! The distances to infeasibility are characterized as inradii:
//!   rho_P(A) = sup { d : every ||v|| <= d lies in A(K cap ball) }
//!   rho_D(A) = sup { d : every ||u|| <= d lies in A' ball + K }
//! and the condition number is C(A) = ||A|| / max(rho_P, rho_D). Exactly one of
//! the two distances is positive for a well-posed instance. The estimators
//! below probe the inradius along sampled directions, deciding membership by
//! alternating projections; they are measurement tools for experiments, not
//! certified bounds.

use crate::dense::{self, Mat};
use crate::lorentz::ConeStructure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConditioningError {
    #[error("both distances to infeasibility vanish; condition number unbounded")]
    Unbounded,
}

/// Certifiable condition-number lower bound when unit roundoff u proved
/// insufficient: C(A) >= (c (m+n)^{5/2} r^{11.5} u)^{-2/7}. Clamped to 1,
/// the universal lower bound (rho never exceeds ||A||); below that the
/// failure certifies nothing.
pub fn condition_lower_bound(u: f64, m: usize, n_base: usize, r_full: usize, c: f64) -> f64 {
    let mn = (m + n_base) as f64;
    let r = r_full as f64;
    (c * mn.powf(2.5) * r.powf(11.5) * u).powf(-2.0 / 7.0).max(1.0)
}

/// Unit roundoff sufficient for instances with condition number up to `cond`:
/// u* = 1 / (c (m+n)^{5/2} r^{11.5} cond^{7/2}).
pub fn u_star(cond: f64, m: usize, n_base: usize, r_full: usize, c: f64) -> f64 {
    let mn = (m + n_base) as f64;
    let r = r_full as f64;
    1.0 / (c * mn.powf(2.5) * r.powf(11.5) * cond.powf(3.5))
}

/// Euclidean projection onto one Lorentz cone block.
pub fn project_block(v: &[f64]) -> Vec<f64> {
    let tail_norm = dense::norm2(&v[1..]);
    if v[0] >= tail_norm {
        return v.to_vec();
    }
    if v[0] <= -tail_norm {
        return vec![0.0; v.len()];
    }
    let lam = 0.5 * (v[0] + tail_norm);
    let mut out = Vec::with_capacity(v.len());
    out.push(lam);
    for t in &v[1..] {
        out.push(lam * t / tail_norm);
    }
    out
}

/// Projection onto the cone product.
pub fn project_cone(cone: &ConeStructure, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for r in cone.block_ranges() {
        out[r.clone()].copy_from_slice(&project_block(&v[r]));
    }
    out
}

fn project_ball(v: &[f64]) -> Vec<f64> {
    let n = dense::norm2(v);
    if n <= 1.0 {
        v.to_vec()
    } else {
        v.iter().map(|t| t / n).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RhoOptions {
    /// Random directions probed on the unit sphere.
    pub directions: usize,
    pub bisection_steps: usize,
    /// Alternating-projection iterations per membership test.
    pub projection_iters: usize,
    pub seed: u64,
}

impl Default for RhoOptions {
    fn default() -> Self {
        Self { directions: 24, bisection_steps: 28, projection_iters: 300, seed: 7 }
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        // Gaussian via Box-Muller keeps directions uniform on the sphere.
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let u1: f64 = rng.gen::<f64>().max(1e-12);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let n = dense::norm2(&v);
        if n > 1e-9 {
            return v.iter().map(|t| t / n).collect();
        }
    }
}

/// Is v in A(K cap unit ball)? Alternating projections between the affine set
/// {Ax = v} and K cap ball (whose projector is exactly ball-after-cone).
fn primal_member(a: &Mat, cone: &ConeStructure, gram: &Mat, v: &[f64], iters: usize) -> bool {
    let mut x = vec![0.0; a.cols()];
    for _ in 0..iters {
        x = project_ball(&project_cone(cone, &x));
        let resid = dense::sub(&a.matvec(&x), v);
        let Some(lam) = dense::qr_solve(gram, &resid) else { return false };
        let corr = a.t_matvec(&lam);
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi -= ci;
        }
    }
    let x_feas = project_ball(&project_cone(cone, &x));
    let gap = dense::norm2(&dense::sub(&a.matvec(&x_feas), v));
    gap <= 3e-5 * a.spectral_norm().max(1.0)
}

/// Is u in A' (unit ball) + K? Same scheme on the variable (y, k) with the
/// affine set {A'y + k = u}.
fn dual_member(a: &Mat, cone: &ConeStructure, gram: &Mat, u: &[f64], iters: usize) -> bool {
    let m = a.rows();
    let n = a.cols();
    let mut y = vec![0.0; m];
    let mut k = vec![0.0; n];
    for _ in 0..iters {
        y = project_ball(&y);
        k = project_cone(cone, &k);
        // Project (y, k) onto {A'y + k = u}: correction (A A' + I)^-1 residual.
        let resid: Vec<f64> = {
            let aty = a.t_matvec(&y);
            aty.iter().zip(&k).zip(u).map(|((ai, ki), ui)| ai + ki - ui).collect()
        };
        let Some(lam) = dense::qr_solve(gram, &resid) else { return false };
        let a_lam = a.matvec(&lam);
        for (yi, ci) in y.iter_mut().zip(&a_lam) {
            *yi -= ci;
        }
        for (ki, ci) in k.iter_mut().zip(&lam) {
            *ki -= ci;
        }
    }
    let y_f = project_ball(&y);
    let k_f = project_cone(cone, &k);
    let aty = a.t_matvec(&y_f);
    let gap: f64 = aty
        .iter()
        .zip(&k_f)
        .zip(u)
        .map(|((ai, ki), ui)| (ai + ki - ui) * (ai + ki - ui))
        .sum::<f64>()
        .sqrt();
    gap <= 3e-5 * a.spectral_norm().max(1.0)
}

fn directional_inradius<F: FnMut(&[f64]) -> bool>(
    dim: usize,
    t_hi: f64,
    opts: &RhoOptions,
    mut member: F,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut worst = f64::INFINITY;
    for _ in 0..opts.directions {
        let dir = unit_direction(rng, dim);
        let (mut lo, mut hi) = (0.0f64, t_hi);
        for _ in 0..opts.bisection_steps {
            let mid = 0.5 * (lo + hi);
            let probe: Vec<f64> = dir.iter().map(|d| d * mid).collect();
            if member(&probe) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        worst = worst.min(lo);
        if worst == 0.0 {
            break; // inradius already collapsed along some direction
        }
    }
    worst
}

/// Sampled estimate of rho_P(A).
pub fn estimate_rho_primal(a: &Mat, cone: &ConeStructure, opts: &RhoOptions) -> f64 {
    let gram = a.matmul(&a.transpose());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    directional_inradius(
        a.rows(),
        a.spectral_norm(),
        opts,
        |v| primal_member(a, cone, &gram, v, opts.projection_iters),
        &mut rng,
    )
}

/// Sampled estimate of rho_D(A).
pub fn estimate_rho_dual(a: &Mat, cone: &ConeStructure, opts: &RhoOptions) -> f64 {
    let n = a.cols();
    // Gram of the stacked operator [A' I] is A'A + I.
    let mut gram = a.transpose().matmul(a);
    for i in 0..n {
        gram[(i, i)] += 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    directional_inradius(
        n,
        a.spectral_norm() + 1.0,
        opts,
        |u| dual_member(a, cone, &gram, u, opts.projection_iters),
        &mut rng,
    )
}

#[derive(Debug, Clone)]
pub struct ConditionEstimate {
    pub rho_primal: f64,
    pub rho_dual: f64,
    pub matrix_norm: f64,
    pub condition: f64,
}

/// C(A) = ||A|| / max(rho_P, rho_D) from the sampled estimates.
pub fn estimate_condition(
    a: &Mat,
    cone: &ConeStructure,
    opts: &RhoOptions,
) -> Result<ConditionEstimate, ConditioningError> {
    let rho_p = estimate_rho_primal(a, cone, opts);
    let rho_d = estimate_rho_dual(a, cone, opts);
    let matrix_norm = a.spectral_norm();
    let best = rho_p.max(rho_d);
    if best <= 1e-9 * matrix_norm.max(1.0) {
        return Err(ConditioningError::Unbounded);
    }
    Ok(ConditionEstimate { rho_primal: rho_p, rho_dual: rho_d, matrix_norm, condition: matrix_norm / best })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    Primal,
    Dual,
}

/// A generated instance together with the witness that fixes its answer.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub a: Mat,
    pub cone: ConeStructure,
    pub witness: Vec<f64>,
    pub kind: InstanceKind,
}

fn interior_witness(cone: &ConeStructure, margin: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    assert!((0.0..1.0).contains(&margin) && margin > 0.0);
    let mut x = vec![0.0; cone.ambient_dim()];
    for r in cone.block_ranges() {
        let blk = &mut x[r];
        let mut nrm2 = 0.0;
        for v in blk.iter_mut().skip(1) {
            *v = rng.gen::<f64>() * 2.0 - 1.0;
            nrm2 += *v * *v;
        }
        // Relative margin: (x0 - ||xbar||)/x0 = margin.
        blk[0] = nrm2.sqrt() / (1.0 - margin);
    }
    x
}

/// Instance whose primal side is strictly feasible: rows of a random matrix are
/// projected orthogonal to an interior witness x*, so A x* = 0 exactly.
pub fn gen_primal_instance(
    m: usize,
    tail_dims: &[usize],
    margin: f64,
    seed: u64,
) -> GeneratedInstance {
    let cone = ConeStructure::new(tail_dims.to_vec()).expect("valid dims");
    let n = cone.ambient_dim();
    assert!(m < n, "need m < n for a nontrivial nullspace");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let witness = interior_witness(&cone, margin, &mut rng);
    let wn2 = dense::dot(&witness, &witness);
    let mut a = Mat::zeros(m, n);
    for i in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let coef = dense::dot(&row, &witness) / wn2;
        for j in 0..n {
            a[(i, j)] = row[j] - coef * witness[j];
        }
    }
    GeneratedInstance { a, cone, witness, kind: InstanceKind::Primal }
}

/// Instance whose dual side is strictly feasible: a rank-one correction makes
/// A'y* equal to -s* for an interior s*.
pub fn gen_dual_instance(
    m: usize,
    tail_dims: &[usize],
    margin: f64,
    seed: u64,
) -> GeneratedInstance {
    let cone = ConeStructure::new(tail_dims.to_vec()).expect("valid dims");
    let n = cone.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s_star = interior_witness(&cone, margin, &mut rng);
    let y_star = unit_direction(&mut rng, m);
    let b0 = Mat::from_nested(
        (0..m)
            .map(|_| (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
            .collect::<Vec<Vec<f64>>>(),
    );
    // A := B0 + y* (-s* - B0' y*)' / ||y*||^2, so A'y* = -s*.
    let b0ty = b0.t_matvec(&y_star);
    let corr: Vec<f64> = s_star.iter().zip(&b0ty).map(|(s, b)| -s - b).collect();
    let yn2 = dense::dot(&y_star, &y_star);
    let mut a = b0;
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] += y_star[i] * corr[j] / yn2;
        }
    }
    GeneratedInstance { a, cone, witness: y_star, kind: InstanceKind::Dual }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_condition_round_trip() {
        for &cond in &[2.0, 10.0, 1e3, 1e6] {
            for &(m, n, r) in &[(3usize, 8usize, 4usize), (6, 20, 5)] {
                let u = u_star(cond, m, n, r, 1e6);
                let back = condition_lower_bound(u, m, n, r, 1e6);
                assert!((back - cond).abs() <= 1e-12 * cond, "{back} vs {cond}");
            }
        }
    }

    #[test]
    fn cone_projection_cases() {
        // Interior fixed, polar mapped to zero, boundary case halves the gap.
        assert_eq!(project_block(&[2.0, 1.0]), vec![2.0, 1.0]);
        assert_eq!(project_block(&[-2.0, 1.0]), vec![0.0, 0.0]);
        let p = project_block(&[0.0, 2.0]);
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
        // Projection is idempotent and never increases distance to the cone.
        let q = project_block(&p);
        assert_eq!(p, q);
    }

    #[test]
    fn known_inradius_on_one_row_instances() {
        // A = [0 1] on one 2d block: image of K cap ball on the x1 axis is
        // [-1/sqrt2, 1/sqrt2], so rho_P = 1/sqrt2. The dual side is infeasible.
        let cone = ConeStructure::new(vec![1]).unwrap();
        let a = Mat::from_nested(vec![vec![0.0, 1.0]]);
        let opts = RhoOptions { directions: 32, ..RhoOptions::default() };
        let rho_p = estimate_rho_primal(&a, &cone, &opts);
        let want = 1.0 / 2f64.sqrt();
        // Sampling bias is one-sided: the min over directions sits above the
        // true inradius, by little once the worst direction is nearly hit.
        assert!(rho_p >= 0.97 * want && rho_p <= 1.15 * want, "rho_p = {rho_p}");
        assert!(estimate_rho_dual(&a, &cone, &opts) <= 0.05);

        // A = [1 0]: rho_P = 0 (image is [0,1]), rho_D = 1/sqrt2.
        let b = Mat::from_nested(vec![vec![1.0, 0.0]]);
        assert!(estimate_rho_primal(&b, &cone, &opts) <= 0.05);
        let rho_d = estimate_rho_dual(&b, &cone, &opts);
        assert!(rho_d >= 0.97 * want && rho_d <= 1.15 * want, "rho_d = {rho_d}");
    }

    #[test]
    fn condition_estimate_uses_the_feasible_side() {
        let cone = ConeStructure::new(vec![1]).unwrap();
        let a = Mat::from_nested(vec![vec![0.0, 1.0]]);
        let opts = RhoOptions { directions: 6, ..RhoOptions::default() };
        let est = estimate_condition(&a, &cone, &opts).unwrap();
        assert!(est.rho_primal > est.rho_dual);
        assert!((est.condition - est.matrix_norm / est.rho_primal).abs() < 1e-12);
    }

    #[test]
    fn primal_generator_produces_valid_witness() {
        for seed in 0..20u64 {
            let inst = gen_primal_instance(3, &[2, 3], 0.4, seed);
            assert_eq!(inst.kind, InstanceKind::Primal);
            assert!(inst.cone.is_strictly_interior(&inst.witness));
            let ax = inst.a.matvec(&inst.witness);
            assert!(
                dense::norm2(&ax) <= 1e-12 * inst.a.frob_norm() * dense::norm2(&inst.witness)
            );
            // Requested relative margin is realized blockwise.
            for r in inst.cone.block_ranges() {
                let blk = &inst.witness[r];
                let rel = crate::lorentz::block_margin(blk) / blk[0];
                assert!((rel - 0.4).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dual_generator_produces_valid_witness() {
        for seed in 0..20u64 {
            let inst = gen_dual_instance(4, &[2, 2], 0.3, seed);
            assert_eq!(inst.kind, InstanceKind::Dual);
            let neg_aty: Vec<f64> = inst.a.t_matvec(&inst.witness).iter().map(|v| -v).collect();
            assert!(inst.cone.is_strictly_interior(&neg_aty), "seed {seed}");
        }
    }

    #[test]
    fn generated_instances_have_positive_expected_rho() {
        let inst = gen_primal_instance(2, &[2, 2], 0.5, 33);
        let opts = RhoOptions { directions: 8, ..RhoOptions::default() };
        let est = estimate_condition(&inst.a, &inst.cone, &opts).unwrap();
        assert!(est.rho_primal > 0.0);
        assert!(est.condition >= 1.0);
    }
}
