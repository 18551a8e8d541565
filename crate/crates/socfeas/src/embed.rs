//! Self-dual embedding of the primal/dual conic feasibility pair.
//!
//! For A (m x N, full row rank) over a product K of Lorentz cones, exactly one
//! of
//!   (P)  A x = 0,   x strictly interior to K
//!   (D)  A'y + s = 0,  s strictly interior to K
//! holds. Both are folded into one strictly feasible conic program over the
//! enlarged cone K x L_N x L_m in variables (x, t, x', tau, x''):
//!
//!   rows of the constraint matrix:  [ A  0  0  0  I ]     (m rows)
//!                                   [-I  0  I  0  0 ]     (N rows: x' = x)
//!                                   [ 0  1  0  0  0 ]     (1 row:  t  = 1)
//!   right-hand side (0,...,0,1), objective = the tau coordinate.
//!
//! The central path of this embedding always exists; which side terminates the
//! interior-point iteration reveals which of (P)/(D) is solvable.

use crate::dense::Mat;
use crate::lorentz::{ConeStructure, ExtendedConeStructure, StructureError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("block {block} of the constraint matrix is identically zero")]
    ZeroBlock { block: usize },
    #[error("constraint matrix has {cols} columns but the cone lives in dimension {dim}")]
    DimensionMismatch { cols: usize, dim: usize },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Scale each block of columns of A so its Frobenius norm is 1/sqrt(r).
/// Membership certificates transform per-block by the same positive scalars, so
/// feasibility of either side is preserved exactly. Returns the scaled matrix
/// and the factor k_i each block was multiplied by.
pub fn normalize_blocks(a: &Mat, cone: &ConeStructure) -> Result<(Mat, Vec<f64>), InstanceError> {
    if a.cols() != cone.ambient_dim() {
        return Err(InstanceError::DimensionMismatch { cols: a.cols(), dim: cone.ambient_dim() });
    }
    let target = 1.0 / (cone.block_count() as f64).sqrt();
    let mut out = a.clone();
    let mut scales = Vec::with_capacity(cone.block_count());
    for (bi, r) in cone.block_ranges().enumerate() {
        let mut nrm2 = 0.0;
        for i in 0..a.rows() {
            for j in r.clone() {
                nrm2 += a[(i, j)] * a[(i, j)];
            }
        }
        if nrm2 == 0.0 {
            return Err(InstanceError::ZeroBlock { block: bi });
        }
        let k = target / nrm2.sqrt();
        for i in 0..a.rows() {
            for j in r.clone() {
                out[(i, j)] *= k;
            }
        }
        scales.push(k);
    }
    Ok((out, scales))
}

/// The embedded problem data plus the coordinate bookkeeping for its three
/// variable groups.
#[derive(Debug, Clone)]
pub struct Embedding {
    a: Mat,
    cone: ExtendedConeStructure,
    script_a: Mat,
    b_vec: Vec<f64>,
    c_vec: Vec<f64>,
}

impl Embedding {
    pub fn build(a: Mat, base: ConeStructure) -> Result<Self, InstanceError> {
        let n = base.ambient_dim();
        if a.cols() != n {
            return Err(InstanceError::DimensionMismatch { cols: a.cols(), dim: n });
        }
        let m = a.rows();
        let cone = ExtendedConeStructure::new(base, m)?;
        let rows = m + n + 1;
        let cols = 2 * n + m + 2;
        let mut sa = Mat::zeros(rows, cols);
        for i in 0..m {
            for j in 0..n {
                sa[(i, j)] = a[(i, j)];
            }
            sa[(i, 2 * n + 2 + i)] = 1.0; // x'' slack for the A x rows
        }
        for i in 0..n {
            sa[(m + i, i)] = -1.0;
            sa[(m + i, n + 1 + i)] = 1.0; // x' = x
        }
        sa[(m + n, n)] = 1.0; // t = 1
        let mut b_vec = vec![0.0; rows];
        b_vec[rows - 1] = 1.0;
        let mut c_vec = vec![0.0; cols];
        c_vec[2 * n + 1] = 1.0; // objective weight sits on tau
        Ok(Self { a, cone, script_a: sa, b_vec, c_vec })
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn cone(&self) -> &ExtendedConeStructure {
        &self.cone
    }

    pub fn script_a(&self) -> &Mat {
        &self.script_a
    }

    pub fn b_vec(&self) -> &[f64] {
        &self.b_vec
    }

    pub fn c_vec(&self) -> &[f64] {
        &self.c_vec
    }

    pub fn base_dim(&self) -> usize {
        self.cone.base().ambient_dim()
    }

    pub fn row_dim(&self) -> usize {
        self.b_vec.len()
    }

    pub fn var_dim(&self) -> usize {
        self.c_vec.len()
    }

    // Coordinate slots of the primal variable (x, t, x', tau, x'').
    pub fn idx_x(&self) -> std::ops::Range<usize> {
        0..self.base_dim()
    }

    pub fn idx_t(&self) -> usize {
        self.base_dim()
    }

    pub fn idx_xp(&self) -> std::ops::Range<usize> {
        self.base_dim() + 1..2 * self.base_dim() + 1
    }

    pub fn idx_tau(&self) -> usize {
        2 * self.base_dim() + 1
    }

    pub fn idx_xpp(&self) -> std::ops::Range<usize> {
        2 * self.base_dim() + 2..self.var_dim()
    }

    // Slots of the row multiplier (y, y', -eta).
    pub fn idx_y(&self) -> std::ops::Range<usize> {
        0..self.a.rows()
    }

    pub fn idx_yp(&self) -> std::ops::Range<usize> {
        self.a.rows()..self.a.rows() + self.base_dim()
    }

    pub fn idx_eta(&self) -> usize {
        self.row_dim() - 1
    }
}

/// One interior iterate of the embedded problem.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub x: Vec<f64>, // length var_dim
    pub y: Vec<f64>, // length row_dim
    pub s: Vec<f64>, // length var_dim
}

impl Iterate {
    pub fn x_base<'a>(&'a self, emb: &Embedding) -> &'a [f64] {
        &self.x[emb.idx_x()]
    }

    pub fn t(&self, emb: &Embedding) -> f64 {
        self.x[emb.idx_t()]
    }

    pub fn x_prime<'a>(&'a self, emb: &Embedding) -> &'a [f64] {
        &self.x[emb.idx_xp()]
    }

    pub fn tau(&self, emb: &Embedding) -> f64 {
        self.x[emb.idx_tau()]
    }

    pub fn x_slack<'a>(&'a self, emb: &Embedding) -> &'a [f64] {
        &self.x[emb.idx_xpp()]
    }

    pub fn s_base<'a>(&'a self, emb: &Embedding) -> &'a [f64] {
        &self.s[emb.idx_x()]
    }

    pub fn t_dual(&self, emb: &Embedding) -> f64 {
        self.s[emb.idx_t()]
    }

    pub fn s_prime<'a>(&'a self, emb: &Embedding) -> &'a [f64] {
        &self.s[emb.idx_xp()]
    }

    pub fn tau_dual(&self, emb: &Embedding) -> f64 {
        self.s[emb.idx_tau()]
    }

    pub fn s_slack<'a>(&'a self, emb: &Embedding) -> &'a [f64] {
        &self.s[emb.idx_xpp()]
    }

    pub fn y_orig<'a>(&'a self, emb: &Embedding) -> &'a [f64] {
        &self.y[emb.idx_y()]
    }

    pub fn y_prime<'a>(&'a self, emb: &Embedding) -> &'a [f64] {
        &self.y[emb.idx_yp()]
    }

    pub fn eta(&self, emb: &Embedding) -> f64 {
        -self.y[emb.idx_eta()]
    }

    /// max of ||script_A x - b|| and ||script_A' y + s - c||: exact-feasibility
    /// drift of the iterate.
    pub fn equality_residual(&self, emb: &Embedding) -> f64 {
        let ax = emb.script_a.matvec(&self.x);
        let primal: f64 = ax
            .iter()
            .zip(&emb.b_vec)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let aty = emb.script_a.t_matvec(&self.y);
        let dual: f64 = aty
            .iter()
            .zip(&self.s)
            .zip(&emb.c_vec)
            .map(|((a, s), c)| (a + s - c) * (a + s - c))
            .sum::<f64>()
            .sqrt();
        primal.max(dual)
    }
}

/// Well-centered strictly feasible starting point.
///
/// With a = 1/sqrt(r+1) and e the base-cone identity, the point
///   x = (a e, 1, a e, tau0, -a Ae),
///   y = (-(a/tau0) Ae, (2 mu0 / a) e, -eta),   eta = 2 mu0 (r+1),
///   s = c - script_A' y,
///   mu0 = max(a ||Ae||, 1) / beta,   tau0 = mu0 + sqrt(mu0^2 + a^2 ||Ae||^2)
/// satisfies both equality systems exactly and lands within O(beta^2) of the
/// central path: the only centering defect is the (a/tau0) A'A e term hiding in
/// the base block of s, whose norm is at most a beta / tau0 << beta.
pub fn initial_point(emb: &Embedding) -> Iterate {
    let base = emb.cone().base();
    let r = base.block_count() as f64;
    let a_coef = 1.0 / (r + 1.0).sqrt();
    let e = base.identity();
    let ae = emb.a().matvec(&e);
    let ae_norm = crate::dense::norm2(&ae);
    let beta = crate::ipm::NEIGHBORHOOD_RADIUS;
    let mu0 = (a_coef * ae_norm).max(1.0) / beta;
    let tau0 = mu0 + (mu0 * mu0 + a_coef * a_coef * ae_norm * ae_norm).sqrt();

    let mut x = vec![0.0; emb.var_dim()];
    for (i, &ei) in e.iter().enumerate() {
        x[i] = a_coef * ei;
        x[emb.idx_xp()][i] = a_coef * ei;
    }
    x[emb.idx_t()] = 1.0;
    x[emb.idx_tau()] = tau0;
    for (i, &aei) in ae.iter().enumerate() {
        x[emb.idx_xpp()][i] = -a_coef * aei;
    }

    let mut y = vec![0.0; emb.row_dim()];
    for (i, &aei) in ae.iter().enumerate() {
        y[i] = -(a_coef / tau0) * aei;
    }
    for (i, &ei) in e.iter().enumerate() {
        y[emb.idx_yp()][i] = (2.0 * mu0 / a_coef) * ei;
    }
    y[emb.idx_eta()] = -2.0 * mu0 * (r + 1.0);

    let aty = emb.script_a().t_matvec(&y);
    let s: Vec<f64> = emb.c_vec().iter().zip(&aty).map(|(c, v)| c - v).collect();

    Iterate { x, y, s }
}

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("normal matrix A H^-1 A' is numerically singular")]
    SingularNormalMatrix,
}

/// Dual certificate: the y block of the row multiplier, whose slack -A'y is the
/// strictly interior s produced by the dual stopping rule.
pub fn recover_dual(emb: &Embedding, z: &Iterate) -> Vec<f64> {
    z.y_orig(emb).to_vec()
}

/// Projection x_breve = x_hat - Hb^-1 A' (A Hb^-1 A')^-1 A x_hat onto the
/// nullspace of A in the local metric Hb = H(x_hat), computed natively. The
/// projection removes the O(mu) equality drift while moving x_hat by less than
/// its interior margin.
pub fn associated_solution(
    a: &Mat,
    cone: &ConeStructure,
    x_hat: &[f64],
) -> Result<Vec<f64>, RecoveryError> {
    let ax = a.matvec(x_hat);
    let m = a.rows();
    // Normal matrix A H^-1 A' column by column.
    let mut normal = Mat::zeros(m, m);
    for j in 0..m {
        let aj: Vec<f64> = {
            let mut unit = vec![0.0; m];
            unit[j] = 1.0;
            a.t_matvec(&unit)
        };
        let haj = crate::barrier::hessian_inv_apply(cone, x_hat, &aj);
        let naj = a.matvec(&haj);
        for i in 0..m {
            normal[(i, j)] = naj[i];
        }
    }
    let lambda = crate::dense::qr_solve(&normal, &ax).ok_or(RecoveryError::SingularNormalMatrix)?;
    let at_lambda = a.t_matvec(&lambda);
    let correction = crate::barrier::hessian_inv_apply(cone, x_hat, &at_lambda);
    Ok(x_hat.iter().zip(&correction).map(|(a, b)| a - b).collect())
}

/// Primal certificate: the base block x_hat of the iterate, plus its associated
/// exactly-feasible point x_breve.
pub fn recover_primal(emb: &Embedding, z: &Iterate) -> Result<(Vec<f64>, Vec<f64>), RecoveryError> {
    let x_hat = z.x_base(emb).to_vec();
    let x_breve = associated_solution(emb.a(), emb.cone().base(), &x_hat)?;
    Ok((x_hat, x_breve))
}
