//! Rounded computational kernels built on the simulated scalar arithmetic.
//!
//! Two surfaces: f64-in/f64-out helpers for contexts up to 53 bits (where the
//! double carrier is exact), and `SimFloat`/`SfMat` forms that keep full
//! precision for contexts wider than a double.

use super::{RoundingContext, SimFloat};
use crate::dense::Mat;

/// `fl(x)`: x rounded to the context width.
pub fn round_scalar(x: f64, ctx: &RoundingContext) -> f64 {
    SimFloat::from_f64(x, ctx).to_f64()
}

pub fn radd(a: f64, b: f64, ctx: &RoundingContext) -> f64 {
    SimFloat::from_f64(a, ctx).add(&SimFloat::from_f64(b, ctx), ctx).to_f64()
}

pub fn rsub(a: f64, b: f64, ctx: &RoundingContext) -> f64 {
    SimFloat::from_f64(a, ctx).sub(&SimFloat::from_f64(b, ctx), ctx).to_f64()
}

pub fn rmul(a: f64, b: f64, ctx: &RoundingContext) -> f64 {
    SimFloat::from_f64(a, ctx).mul(&SimFloat::from_f64(b, ctx), ctx).to_f64()
}

pub fn rdiv(a: f64, b: f64, ctx: &RoundingContext) -> f64 {
    SimFloat::from_f64(a, ctx).div(&SimFloat::from_f64(b, ctx), ctx).to_f64()
}

pub fn rsqrt(a: f64, ctx: &RoundingContext) -> f64 {
    SimFloat::from_f64(a, ctx).sqrt(ctx).to_f64()
}

/// Pairwise (balanced-tree) rounded sum. Depth ceil(log2 n), so the accumulated
/// relative error stays within gamma_{ceil(log2 n)} of the exact sum.
pub fn sf_sum(xs: &[SimFloat], ctx: &RoundingContext) -> SimFloat {
    match xs.len() {
        0 => SimFloat::zero(),
        1 => xs[0].clone(),
        n => {
            let mid = n / 2;
            sf_sum(&xs[..mid], ctx).add(&sf_sum(&xs[mid..], ctx), ctx)
        }
    }
}

/// Rounded inner product: rounded elementwise products, pairwise-summed.
pub fn sf_dot(x: &[SimFloat], y: &[SimFloat], ctx: &RoundingContext) -> SimFloat {
    assert_eq!(x.len(), y.len());
    let prods: Vec<SimFloat> = x.iter().zip(y).map(|(a, b)| a.mul(b, ctx)).collect();
    sf_sum(&prods, ctx)
}

/// Rounded squared-then-summed Euclidean norm.
pub fn sf_norm2(x: &[SimFloat], ctx: &RoundingContext) -> SimFloat {
    sf_dot(x, x, ctx).sqrt(ctx)
}

pub fn rsum(xs: &[f64], ctx: &RoundingContext) -> f64 {
    let v: Vec<SimFloat> = xs.iter().map(|&x| SimFloat::from_f64(x, ctx)).collect();
    sf_sum(&v, ctx).to_f64()
}

pub fn rdot(x: &[f64], y: &[f64], ctx: &RoundingContext) -> f64 {
    assert_eq!(x.len(), y.len());
    let sx: Vec<SimFloat> = x.iter().map(|&v| SimFloat::from_f64(v, ctx)).collect();
    let sy: Vec<SimFloat> = y.iter().map(|&v| SimFloat::from_f64(v, ctx)).collect();
    sf_dot(&sx, &sy, ctx).to_f64()
}

pub fn rnorm2(x: &[f64], ctx: &RoundingContext) -> f64 {
    let sx: Vec<SimFloat> = x.iter().map(|&v| SimFloat::from_f64(v, ctx)).collect();
    sf_norm2(&sx, ctx).to_f64()
}

/// Dense matrix of simulated values, row-major.
#[derive(Debug, Clone)]
pub struct SfMat {
    rows: usize,
    cols: usize,
    data: Vec<SimFloat>,
}

impl SfMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![SimFloat::zero(); rows * cols] }
    }

    pub fn from_mat(a: &Mat, ctx: &RoundingContext) -> Self {
        let data = a.data().iter().map(|&v| SimFloat::from_f64(v, ctx)).collect();
        Self { rows: a.rows(), cols: a.cols(), data }
    }

    pub fn to_mat(&self) -> Mat {
        let mut out = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self.get(i, j).to_f64();
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &SimFloat {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: SimFloat) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[SimFloat] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<SimFloat> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    /// Column slice restricted to rows `lo..`.
    pub fn col_from(&self, j: usize, lo: usize) -> Vec<SimFloat> {
        (lo..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    /// Rounded matrix product: each entry is an rdot of a row with a column.
    pub fn matmul(&self, other: &SfMat, ctx: &RoundingContext) -> SfMat {
        assert_eq!(self.cols, other.rows);
        let mut out = SfMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let col = other.col(j);
                out.set(i, j, sf_dot(self.row(i), &col, ctx));
            }
        }
        out
    }

    /// Rounded matrix-vector product.
    pub fn matvec(&self, x: &[SimFloat], ctx: &RoundingContext) -> Vec<SimFloat> {
        assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| sf_dot(self.row(i), x, ctx)).collect()
    }
}

/// Rounded product of two native-carried matrices.
pub fn rmatmul(a: &Mat, b: &Mat, ctx: &RoundingContext) -> Mat {
    SfMat::from_mat(a, ctx).matmul(&SfMat::from_mat(b, ctx), ctx).to_mat()
}
