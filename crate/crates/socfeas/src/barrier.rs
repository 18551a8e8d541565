//! Logarithmic barrier calculus and Nesterov-Todd scaling for products of
//! Lorentz cones.
//!
//! For one cone block the barrier is -ln(x0^2 - ||xbar||^2) with barrier
//! parameter 2 per block. All Hessian work uses the closed forms
//!   H(x)   = (2/d) (-J) + (4/d^2) (Jx)(Jx)^T,   d = det x,  J = diag(1,-1,..,-1)
//!   H(x)^-1 = x x^T - (d/2) J
//! which avoid forming matrices: only J-reflections, dots, and rank-one terms.

use crate::lorentz::ConeStructure;
use crate::roundoff::{sf_dot, RoundingContext, SimFloat};

/// Barrier parameter: 2 per block.
pub fn degree(cone: &ConeStructure) -> f64 {
    2.0 * cone.block_count() as f64
}

/// -sum_i ln det_i(x). Requires a strictly interior point.
pub fn value(cone: &ConeStructure, x: &[f64]) -> f64 {
    cone.block_ranges()
        .map(|r| {
            let d = crate::lorentz::block_det(&x[r]);
            debug_assert!(d > 0.0);
            -d.ln()
        })
        .sum()
}

fn jref(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    out.push(v[0]);
    out.extend(v[1..].iter().map(|t| -t));
    out
}

/// Gradient: per block  -(2/d) Jx.
pub fn gradient(cone: &ConeStructure, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for r in cone.block_ranges() {
        let xb = &x[r.clone()];
        let d = crate::lorentz::block_det(xb);
        g[r.clone()][0] = -2.0 * xb[0] / d;
        for (gi, &xi) in g[r].iter_mut().skip(1).zip(&xb[1..]) {
            *gi = 2.0 * xi / d;
        }
    }
    g
}

/// H(x) v, blockwise.
pub fn hessian_apply(cone: &ConeStructure, x: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for r in cone.block_ranges() {
        let xb = &x[r.clone()];
        let vb = &v[r.clone()];
        let d = crate::lorentz::block_det(xb);
        let jx = jref(xb);
        let jv = jref(vb);
        let c = 4.0 * crate::dense::dot(&jx, vb) / (d * d);
        for ((o, jvi), jxi) in out[r].iter_mut().zip(&jv).zip(&jx) {
            *o = -2.0 * jvi / d + c * jxi;
        }
    }
    out
}

/// H(x)^-1 v, blockwise:  <x,v> x - (d/2) Jv.
pub fn hessian_inv_apply(cone: &ConeStructure, x: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for r in cone.block_ranges() {
        let xb = &x[r.clone()];
        let vb = &v[r.clone()];
        let d = crate::lorentz::block_det(xb);
        let c = crate::dense::dot(xb, vb);
        let jv = jref(vb);
        for ((o, &xi), jvi) in out[r].iter_mut().zip(xb).zip(&jv) {
            *o = c * xi - 0.5 * d * jvi;
        }
    }
    out
}

/// sqrt(v^T H(x) v): the norm the proximity measure is stated in.
pub fn local_norm(cone: &ConeStructure, x: &[f64], v: &[f64]) -> f64 {
    crate::dense::dot(v, &hessian_apply(cone, x, v)).max(0.0).sqrt()
}

/// sqrt(v^T H(x)^-1 v).
pub fn dual_local_norm(cone: &ConeStructure, x: &[f64], v: &[f64]) -> f64 {
    crate::dense::dot(v, &hessian_inv_apply(cone, x, v)).max(0.0).sqrt()
}

/// Per-block Nesterov-Todd scaling data for a strictly interior pair (x, s).
/// The scaling point w solves H(w) x = s; everything downstream only needs
/// (gamma, alpha, zeta) plus the two determinants.
#[derive(Debug, Clone)]
pub struct ScalingBlock {
    pub gamma: f64,
    pub alpha: f64,
    pub zeta: Vec<f64>,
    pub det_x: f64,
    pub det_s: f64,
}

impl ScalingBlock {
    pub fn new(x_blk: &[f64], s_blk: &[f64]) -> Self {
        let det_x = crate::lorentz::block_det(x_blk);
        let det_s = crate::lorentz::block_det(s_blk);
        debug_assert!(det_x > 0.0 && det_s > 0.0);
        let gamma = (det_s / det_x).powf(0.25);
        let xi0 = s_blk[0] / gamma + gamma * x_blk[0];
        let xibar: Vec<f64> = x_blk[1..]
            .iter()
            .zip(&s_blk[1..])
            .map(|(&xi, &si)| si / gamma - gamma * xi)
            .collect();
        // det(xi) = 2 (sqrt(det_x det_s) + <x,s>); algebraically equal to
        // xi0^2 - ||xibar||^2 but immune to cancellation.
        let det_xi = 2.0 * ((det_x * det_s).sqrt() + crate::dense::dot(x_blk, s_blk));
        let dcap = det_xi.sqrt();
        let alpha = xi0 / dcap;
        let zeta = xibar.iter().map(|z| z / dcap).collect();
        Self { gamma, alpha, zeta, det_x, det_s }
    }

    /// The scaling point w itself: (sqrt2/gamma) (alpha, -zeta).
    pub fn w_point(&self) -> Vec<f64> {
        let c = std::f64::consts::SQRT_2 / self.gamma;
        let mut w = Vec::with_capacity(self.zeta.len() + 1);
        w.push(c * self.alpha);
        w.extend(self.zeta.iter().map(|z| -c * z));
        w
    }

    /// H(w)^{-1/2} v  =  (1/gamma) [ alpha v0 - zeta.vbar ;
    ///                               vbar - v0 zeta + zeta (zeta.vbar)/(1+alpha) ].
    pub fn inv_sqrt_apply(&self, v: &[f64]) -> Vec<f64> {
        let v0 = v[0];
        let vbar = &v[1..];
        let zv = crate::dense::dot(&self.zeta, vbar);
        let mut out = Vec::with_capacity(v.len());
        out.push((self.alpha * v0 - zv) / self.gamma);
        let c = -v0 + zv / (1.0 + self.alpha);
        for (&vi, &zi) in vbar.iter().zip(&self.zeta) {
            out.push((vi + c * zi) / self.gamma);
        }
        out
    }
}

/// Scaling blocks for every cone of the product.
pub fn scaling_blocks(cone: &ConeStructure, x: &[f64], s: &[f64]) -> Vec<ScalingBlock> {
    cone.block_ranges()
        .map(|r| ScalingBlock::new(&x[r.clone()], &s[r]))
        .collect()
}

/// The concatenated scaling point w over all blocks.
pub fn scaling_point(cone: &ConeStructure, x: &[f64], s: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(x.len());
    for b in scaling_blocks(cone, x, s) {
        w.extend(b.w_point());
    }
    w
}

/// Simulated-precision counterpart of `ScalingBlock`: every operation in its
/// construction and application is individually rounded to the context width.
#[derive(Debug, Clone)]
pub struct SfScalingBlock {
    gamma: SimFloat,
    alpha: SimFloat,
    zeta: Vec<SimFloat>,
}

impl SfScalingBlock {
    pub fn build(x_blk: &[f64], s_blk: &[f64], ctx: &RoundingContext) -> Self {
        let xs: Vec<SimFloat> = x_blk.iter().map(|&v| SimFloat::from_f64(v, ctx)).collect();
        let ss: Vec<SimFloat> = s_blk.iter().map(|&v| SimFloat::from_f64(v, ctx)).collect();
        let det = |v: &[SimFloat]| -> SimFloat {
            let head = v[0].mul(&v[0], ctx);
            let tail = sf_dot(&v[1..], &v[1..], ctx);
            head.sub(&tail, ctx)
        };
        let det_x = det(&xs);
        let det_s = det(&ss);
        let gamma = det_s.div(&det_x, ctx).sqrt(ctx).sqrt(ctx);
        let xi0 = ss[0].div(&gamma, ctx).add(&gamma.mul(&xs[0], ctx), ctx);
        let xibar: Vec<SimFloat> = xs[1..]
            .iter()
            .zip(&ss[1..])
            .map(|(xi, si)| si.div(&gamma, ctx).sub(&gamma.mul(xi, ctx), ctx))
            .collect();
        let two = SimFloat::from_f64(2.0, ctx);
        let det_xi = two.mul(
            &det_x.mul(&det_s, ctx).sqrt(ctx).add(&sf_dot(&xs, &ss, ctx), ctx),
            ctx,
        );
        let dcap = det_xi.sqrt(ctx);
        let alpha = xi0.div(&dcap, ctx);
        let zeta = xibar.iter().map(|z| z.div(&dcap, ctx)).collect();
        Self { gamma, alpha, zeta }
    }

    pub fn inv_sqrt_apply(&self, v: &[SimFloat], ctx: &RoundingContext) -> Vec<SimFloat> {
        let v0 = &v[0];
        let vbar = &v[1..];
        let zv = sf_dot(&self.zeta, vbar, ctx);
        let one = SimFloat::from_f64(1.0, ctx);
        let mut out = Vec::with_capacity(v.len());
        out.push(self.alpha.mul(v0, ctx).sub(&zv, ctx).div(&self.gamma, ctx));
        let c = zv.div(&one.add(&self.alpha, ctx), ctx).sub(v0, ctx);
        for (vi, zi) in vbar.iter().zip(&self.zeta) {
            out.push(vi.add(&c.mul(zi, ctx), ctx).div(&self.gamma, ctx));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::ConeStructure;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interior_point(cone: &ConeStructure, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = vec![0.0; cone.ambient_dim()];
        for r in cone.block_ranges() {
            let blk = &mut x[r];
            let mut nrm = 0.0;
            for v in blk.iter_mut().skip(1) {
                *v = rng.gen::<f64>() * 2.0 - 1.0;
                nrm += *v * *v;
            }
            blk[0] = nrm.sqrt() + 0.2 + rng.gen::<f64>();
        }
        x
    }

    fn test_cone() -> ConeStructure {
        ConeStructure::new(vec![2, 3, 1]).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cone = test_cone();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..50 {
            let x = interior_point(&cone, &mut rng);
            let g = gradient(&cone, &x);
            let h = 1e-6;
            for i in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (value(&cone, &xp) - value(&cone, &xm)) / (2.0 * h);
                assert!(
                    (g[i] - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "grad[{i}] = {} vs fd {}",
                    g[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let cone = test_cone();
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for _ in 0..20 {
            let x = interior_point(&cone, &mut rng);
            let v: Vec<f64> = (0..x.len()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let hv = hessian_apply(&cone, &x, &v);
            let h = 1e-6;
            let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let gp = gradient(&cone, &xp);
            let gm = gradient(&cone, &xm);
            for i in 0..x.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!(
                    (hv[i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "H v [{i}] = {} vs fd {}",
                    hv[i],
                    fd
                );
            }
        }
    }

    #[test]
    fn barrier_identities() {
        let cone = test_cone();
        let nu = degree(&cone);
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        for _ in 0..100 {
            let x = interior_point(&cone, &mut rng);
            let g = gradient(&cone, &x);
            // H(x) x = -g(x)
            let hx = hessian_apply(&cone, &x, &x);
            for (a, b) in hx.iter().zip(&g) {
                assert!((a + b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            // <x, g(x)> = -nu
            let xg = crate::dense::dot(&x, &g);
            assert!((xg + nu).abs() <= 1e-12 * nu);
            // H^-1(H v) = v
            let v: Vec<f64> = (0..x.len()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let round = hessian_inv_apply(&cone, &x, &hessian_apply(&cone, &x, &v));
            for (a, b) in round.iter().zip(&v) {
                assert!((a - b).abs() <= 1e-11 * (1.0 + b.abs()));
            }
            // H(-g(x)) = H(x)^-1
            let ng: Vec<f64> = g.iter().map(|t| -t).collect();
            let left = hessian_apply(&cone, &ng, &v);
            let right = hessian_inv_apply(&cone, &x, &v);
            for (a, b) in left.iter().zip(&right) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn scaling_point_maps_x_to_s() {
        let cone = test_cone();
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        for _ in 0..100 {
            let x = interior_point(&cone, &mut rng);
            let s = interior_point(&cone, &mut rng);
            let w = scaling_point(&cone, &x, &s);
            let hwx = hessian_apply(&cone, &w, &x);
            for (a, b) in hwx.iter().zip(&s) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn scaling_of_pair_x_minus_gradient_is_x() {
        let cone = test_cone();
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        for _ in 0..50 {
            let x = interior_point(&cone, &mut rng);
            let ng: Vec<f64> = gradient(&cone, &x).iter().map(|t| -t).collect();
            let w = scaling_point(&cone, &x, &ng);
            for (a, b) in w.iter().zip(&x) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn inv_sqrt_apply_squares_to_hessian_inverse() {
        // Applying H(w)^{-1/2} twice equals H(w)^{-1}.
        let cone = test_cone();
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        for _ in 0..50 {
            let x = interior_point(&cone, &mut rng);
            let s = interior_point(&cone, &mut rng);
            let blocks = scaling_blocks(&cone, &x, &s);
            let w = scaling_point(&cone, &x, &s);
            let v: Vec<f64> = (0..x.len()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let mut twice = Vec::new();
            for (b, r) in blocks.iter().zip(cone.block_ranges()) {
                twice.extend(b.inv_sqrt_apply(&b.inv_sqrt_apply(&v[r])));
            }
            let want = hessian_inv_apply(&cone, &w, &v);
            for (a, b) in twice.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn inv_sqrt_apply_is_symmetric() {
        // u^T (H^{-1/2} v) = v^T (H^{-1/2} u): the closed form is a symmetric matrix.
        let cone = ConeStructure::new(vec![4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        for _ in 0..50 {
            let x = interior_point(&cone, &mut rng);
            let s = interior_point(&cone, &mut rng);
            let b = &scaling_blocks(&cone, &x, &s)[0];
            let u: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let v: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let lhs = crate::dense::dot(&u, &b.inv_sqrt_apply(&v));
            let rhs = crate::dense::dot(&v, &b.inv_sqrt_apply(&u));
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn rounded_scaling_matches_native_at_53_bits() {
        let cone = ConeStructure::new(vec![3]).unwrap();
        let ctx = RoundingContext::native();
        let mut rng = ChaCha8Rng::seed_from_u64(137);
        for _ in 0..30 {
            let x = interior_point(&cone, &mut rng);
            let s = interior_point(&cone, &mut rng);
            let native = ScalingBlock::new(&x, &s);
            let rounded = SfScalingBlock::build(&x, &s, &ctx);
            let v: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let sv: Vec<SimFloat> = v.iter().map(|&t| SimFloat::from_f64(t, &ctx)).collect();
            let got: Vec<f64> =
                rounded.inv_sqrt_apply(&sv, &ctx).iter().map(SimFloat::to_f64).collect();
            let want = native.inv_sqrt_apply(&v);
            // Same formulas; only the summation trees can differ by roundoff.
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }
}
