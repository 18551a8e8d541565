//! Small native-precision dense kernels used for recovery formulas, stopping-test
//! singular values, and test oracles. The simulated-precision path has its own
//! kernels in `roundoff`; nothing here routes through a rounding context.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_nested(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c));
        Self { rows: r, cols: c, data: rows.concat() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn frob_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// Largest singular value via one-sided Jacobi.
    pub fn spectral_norm(&self) -> f64 {
        let sv = self.singular_values();
        sv.first().copied().unwrap_or(0.0)
    }

    /// Singular values in descending order, via one-sided Jacobi on the columns.
    pub fn singular_values(&self) -> Vec<f64> {
        // Work on the transpose when wide so columns outnumber rows never matters.
        let a = if self.rows < self.cols { self.transpose() } else { self.clone() };
        let (m, n) = (a.rows, a.cols);
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..m).map(|i| a[(i, j)]).collect())
            .collect();
        let eps = 1e-15;
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for p in 0..n {
                for q in (p + 1)..n {
                    let app = dot(&cols[p], &cols[p]);
                    let aqq = dot(&cols[q], &cols[q]);
                    let apq = dot(&cols[p], &cols[q]);
                    if apq.abs() <= eps * (app * aqq).sqrt() || apq == 0.0 {
                        continue;
                    }
                    off = off.max(apq.abs() / (app * aqq).sqrt().max(f64::MIN_POSITIVE));
                    let zeta = (aqq - app) / (2.0 * apq);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let vp = cols[p][i];
                        let vq = cols[q][i];
                        cols[p][i] = c * vp - s * vq;
                        cols[q][i] = s * vp + c * vq;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
        }
        let mut sv: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv
    }

    pub fn sigma_min(&self) -> f64 {
        let sv = self.singular_values();
        let k = self.rows.min(self.cols);
        sv[k - 1]
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

/// Least-squares solve `min ||A x - b||` for full-column-rank A via Householder QR.
/// Returns `None` when a pivot collapses to zero relative to the matrix scale.
pub fn qr_solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    assert!(a.rows >= a.cols);
    assert_eq!(b.len(), a.rows);
    let (m, n) = (a.rows, a.cols);
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    let scale = a.frob_norm();
    for k in 0..n {
        let mut nrm = 0.0;
        for i in k..m {
            nrm += r[(i, k)] * r[(i, k)];
        }
        let nrm = nrm.sqrt();
        if nrm <= scale * 1e-14 {
            return None;
        }
        let beta = if r[(k, k)] >= 0.0 { -nrm } else { nrm };
        let mut v = vec![0.0; m - k];
        for i in k..m {
            v[i - k] = r[(i, k)];
        }
        v[0] -= beta;
        let vtv = dot(&v, &v);
        if vtv == 0.0 {
            return None;
        }
        for j in k..n {
            let mut c = 0.0;
            for i in k..m {
                c += v[i - k] * r[(i, j)];
            }
            c *= 2.0 / vtv;
            for i in k..m {
                r[(i, j)] -= c * v[i - k];
            }
        }
        let mut c = 0.0;
        for i in k..m {
            c += v[i - k] * rhs[i];
        }
        c *= 2.0 / vtv;
        for i in k..m {
            rhs[i] -= c * v[i - k];
        }
        r[(k, k)] = beta;
    }
    // Back substitution on the upper-triangular block.
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in (k + 1)..n {
            acc -= r[(k, j)] * x[j];
        }
        x[k] = acc / r[(k, k)];
    }
    Some(x)
}
