//! Rounded Householder QR for the inner least-squares problem min ||B v + q||.
//!
//! Every arithmetic operation goes through the simulated-precision scalar layer;
//! reductions use the same pairwise trees as the other kernels. The returned R
//! factor feeds the caller's extremal-singular-value monitoring.

use super::kernels::{sf_dot, sf_norm2, sf_sum, SfMat};
use super::{RoundingContext, SimFloat};
use crate::dense::Mat;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlsError {
    #[error("least-squares matrix is numerically rank deficient at column {col}")]
    RankDeficient { col: usize },
    #[error("least-squares shape mismatch: {rows}x{cols} with rhs {rhs}")]
    ShapeMismatch { rows: usize, cols: usize, rhs: usize },
}

#[derive(Debug, Clone)]
pub struct LlsSolution {
    /// Minimizer of ||B v + q||, rounded to the working context.
    pub solution: Vec<f64>,
    /// Upper-triangular factor of the rounded QR of B (cols x cols).
    pub r_upper: Mat,
    /// Diagonal of the R factor.
    pub r_diag: Vec<f64>,
    /// ||B v + q|| at the minimizer, as produced by the rounded factorization.
    pub residual_norm: f64,
}

/// Householder-QR solve of min ||B v + q|| under the given context. Requires a
/// tall (or square) full-column-rank matrix; near-singular columns are reported
/// rather than silently amplified.
pub fn golub_lls(b: &SfMat, q: &[SimFloat], ctx: &RoundingContext) -> Result<LlsSolution, LlsError> {
    let (m, n) = (b.rows(), b.cols());
    if q.len() != m || m < n || n == 0 {
        return Err(LlsError::ShapeMismatch { rows: m, cols: n, rhs: q.len() });
    }
    // Native magnitude scale for the rank test only; the factorization itself
    // never consults native arithmetic.
    let bscale = b.to_mat().frob_norm();
    let tol = ctx.unit_roundoff() * bscale * m.max(n) as f64;

    let mut w = b.clone();
    let mut rhs: Vec<SimFloat> = q.to_vec();
    for k in 0..n {
        let x = w.col_from(k, k);
        let norm = sf_norm2(&x, ctx);
        if norm.to_f64().abs() <= tol {
            return Err(LlsError::RankDeficient { col: k });
        }
        // Reflect onto -sign(x0)*||x|| e1; the sign choice avoids cancellation.
        let beta = if x[0].is_negative() { norm.clone() } else { norm.neg() };
        let mut v = x.clone();
        v[0] = x[0].sub(&beta, ctx);
        let vtv = sf_dot(&v, &v, ctx);
        let two = SimFloat::from_f64(2.0, ctx);
        for j in k + 1..n {
            let col = w.col_from(j, k);
            let c = two.mul(&sf_dot(&v, &col, ctx), ctx).div(&vtv, ctx);
            for (i, vi) in v.iter().enumerate() {
                let updated = col[i].sub(&c.mul(vi, ctx), ctx);
                w.set(k + i, j, updated);
            }
        }
        let c = two.mul(&sf_dot(&v, &rhs[k..], ctx), ctx).div(&vtv, ctx);
        for (i, vi) in v.iter().enumerate() {
            rhs[k + i] = rhs[k + i].sub(&c.mul(vi, ctx), ctx);
        }
        w.set(k, k, beta);
        for i in k + 1..m {
            w.set(i, k, SimFloat::zero());
        }
    }

    // Back substitution on R v = -(Q^T q)_top, products tree-summed like the
    // other kernels.
    let mut v = vec![SimFloat::zero(); n];
    for k in (0..n).rev() {
        let mut terms = Vec::with_capacity(n - k);
        terms.push(rhs[k].neg());
        for j in k + 1..n {
            terms.push(w.get(k, j).mul(&v[j], ctx).neg());
        }
        let acc = sf_sum(&terms, ctx);
        v[k] = acc.div(w.get(k, k), ctx);
    }

    let residual_norm = sf_norm2(&rhs[n..], ctx).to_f64();
    let mut r_upper = Mat::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r_upper[(i, j)] = w.get(i, j).to_f64();
        }
    }
    let r_diag = (0..n).map(|i| r_upper[(i, i)]).collect();
    let solution = v.iter().map(SimFloat::to_f64).collect();
    Ok(LlsSolution { solution, r_upper, r_diag, residual_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use rand::{Rng, SeedableRng};

    fn to_sf(a: &Mat, ctx: &RoundingContext) -> SfMat {
        SfMat::from_mat(a, ctx)
    }

    fn vec_sf(x: &[f64], ctx: &RoundingContext) -> Vec<SimFloat> {
        x.iter().map(|&v| SimFloat::from_f64(v, ctx)).collect()
    }

    #[test]
    fn matches_native_least_squares_at_53_bits() {
        let ctx = RoundingContext::native();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let m = rng.gen_range(4..12);
            let n = rng.gen_range(1..=m.min(6));
            let a = Mat::from_nested(
                (0..m)
                    .map(|_| (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                    .collect::<Vec<Vec<f64>>>(),
            );
            let q: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let got = golub_lls(&to_sf(&a, &ctx), &vec_sf(&q, &ctx), &ctx).unwrap();
            let neg_q: Vec<f64> = q.iter().map(|v| -v).collect();
            let want = dense::qr_solve(&a, &neg_q).unwrap();
            for (g, w) in got.solution.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10 * (1.0 + w.abs()), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn r_factor_is_a_valid_qr_triangle() {
        // B^T B = R^T R up to rounding; compare Gram matrices.
        let ctx = RoundingContext::native();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let a = Mat::from_nested(
            (0..8)
                .map(|_| (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                .collect::<Vec<Vec<f64>>>(),
        );
        let q = vec![0.0; 8];
        let got = golub_lls(&to_sf(&a, &ctx), &vec_sf(&q, &ctx), &ctx).unwrap();
        let gram_a = a.transpose().matmul(&a);
        let gram_r = got.r_upper.transpose().matmul(&got.r_upper);
        for i in 0..4 {
            for j in 0..4 {
                assert!((gram_a[(i, j)] - gram_r[(i, j)]).abs() <= 1e-12 * gram_a.frob_norm());
            }
        }
        for (i, d) in got.r_diag.iter().enumerate() {
            assert_eq!(*d, got.r_upper[(i, i)]);
        }
    }

    #[test]
    fn consistent_system_has_tiny_residual() {
        let ctx = RoundingContext::native();
        let a = Mat::from_nested(vec![
            vec![1.0, 0.0],
            vec![0.0, 2.0],
            vec![1.0, 1.0],
        ]);
        let v_true = [0.5, -0.25];
        // q = -A v so that min ||Av + q|| = 0.
        let q: Vec<f64> = a.matvec(&v_true).iter().map(|x| -x).collect();
        let got = golub_lls(&to_sf(&a, &ctx), &vec_sf(&q, &ctx), &ctx).unwrap();
        assert!((got.solution[0] - 0.5).abs() < 1e-14);
        assert!((got.solution[1] + 0.25).abs() < 1e-14);
        assert!(got.residual_norm < 1e-14);
    }

    #[test]
    fn duplicate_columns_are_rank_deficient() {
        let ctx = RoundingContext::native();
        let a = Mat::from_nested(vec![
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ]);
        let q = vec![1.0, 0.0, 0.0];
        match golub_lls(&to_sf(&a, &ctx), &vec_sf(&q, &ctx), &ctx) {
            Err(LlsError::RankDeficient { col }) => assert_eq!(col, 1),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let ctx = RoundingContext::native();
        let a = Mat::from_nested(vec![vec![1.0, 2.0, 3.0]]);
        let q = vec![1.0];
        assert!(matches!(
            golub_lls(&to_sf(&a, &ctx), &vec_sf(&q, &ctx), &ctx),
            Err(LlsError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn low_precision_solution_degrades_gracefully() {
        // At 20 bits on a well-conditioned system, the answer should agree with
        // the native solution to roughly the unit roundoff scale.
        let p = 20u32;
        let ctx = RoundingContext::with_bits(p).unwrap();
        let a = Mat::from_nested(vec![
            vec![2.0, 0.5],
            vec![-0.5, 1.5],
            vec![0.25, 0.75],
            vec![1.0, -1.0],
        ]);
        let q = vec![0.3, -0.7, 0.2, 0.9];
        let got = golub_lls(&to_sf(&a, &ctx), &vec_sf(&q, &ctx), &ctx).unwrap();
        let neg_q: Vec<f64> = q.iter().map(|v| -v).collect();
        let want = dense::qr_solve(&a, &neg_q).unwrap();
        for (g, w) in got.solution.iter().zip(&want) {
            assert!((g - w).abs() <= 200.0 * 2f64.powi(-(p as i32)), "{g} vs {w}");
        }
    }
}
