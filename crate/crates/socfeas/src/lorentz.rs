//! Product-of-Lorentz-cones structure and per-block geometry.
//!
//! A block with tail dimension `n` lives in R^{n+1} and is ordered head-first:
//! `v = (v0, vbar)` belongs to the cone iff `v0 >= ||vbar||`.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StructureError {
    #[error("cone structure must contain at least one block")]
    Empty,
    #[error("block {0} has tail dimension 0; every block needs at least one tail coordinate")]
    ZeroTail(usize),
}

/// Dimensions of a product cone `L_{n_1} x ... x L_{n_r}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeStructure {
    dims: Vec<usize>,
    offsets: Vec<usize>, // block i occupies offsets[i]..offsets[i+1]
}

impl ConeStructure {
    pub fn new(dims: Vec<usize>) -> Result<Self, StructureError> {
        if dims.is_empty() {
            return Err(StructureError::Empty);
        }
        if let Some(i) = dims.iter().position(|&n| n == 0) {
            return Err(StructureError::ZeroTail(i));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut off = 0;
        offsets.push(0);
        for &n in &dims {
            off += n + 1;
            offsets.push(off);
        }
        Ok(Self { dims, offsets })
    }

    pub fn block_count(&self) -> usize {
        self.dims.len()
    }

    pub fn tail_dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total ambient dimension `sum_i (n_i + 1)`.
    pub fn ambient_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn block_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.dims.len()).map(|i| self.block_range(i))
    }

    pub fn block<'a>(&self, v: &'a [f64], i: usize) -> &'a [f64] {
        &v[self.block_range(i)]
    }

    /// Central ray `e = ((1,0,..), ..., (1,0,..))`.
    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.ambient_dim()];
        for i in 0..self.block_count() {
            e[self.offsets[i]] = 1.0;
        }
        e
    }

    /// Smallest per-block interior margin `v0 - ||vbar||`.
    pub fn interior_margin(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.ambient_dim());
        self.block_ranges()
            .map(|r| block_margin(&v[r]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_interior(&self, v: &[f64]) -> bool {
        self.interior_margin(v) > 0.0
    }

    /// Smallest per-block determinant `v0^2 - ||vbar||^2`.
    pub fn min_det(&self, v: &[f64]) -> f64 {
        self.block_ranges()
            .map(|r| block_det(&v[r]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `v0^2 - ||vbar||^2` for a single block slice.
pub fn block_det(v: &[f64]) -> f64 {
    debug_assert!(v.len() >= 2);
    let tail: f64 = v[1..].iter().map(|t| t * t).sum();
    v[0] * v[0] - tail
}

/// `v0 - ||vbar||` for a single block slice; positive iff strictly interior.
pub fn block_margin(v: &[f64]) -> f64 {
    debug_assert!(v.len() >= 2);
    let tail: f64 = v[1..].iter().map(|t| t * t).sum();
    v[0] - tail.sqrt()
}

/// Cone structure of the homogeneous embedding: the base blocks followed by
/// one block of tail dimension `N` (ambient N+1) and one of tail dimension `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedConeStructure {
    base: ConeStructure,
    full: ConeStructure,
    m: usize,
}

impl ExtendedConeStructure {
    pub fn new(base: ConeStructure, m: usize) -> Result<Self, StructureError> {
        if m == 0 {
            return Err(StructureError::ZeroTail(base.block_count() + 1));
        }
        let mut dims = base.tail_dims().to_vec();
        dims.push(base.ambient_dim());
        dims.push(m);
        let full = ConeStructure::new(dims)?;
        Ok(Self { base, full, m })
    }

    pub fn base(&self) -> &ConeStructure {
        &self.base
    }

    /// The full product cone (r + 2 blocks) the embedded iterates live in.
    pub fn full(&self) -> &ConeStructure {
        &self.full
    }

    pub fn row_count(&self) -> usize {
        self.m
    }

    /// `r + 2`: the base blocks plus the two auxiliary cones of the embedding.
    pub fn block_count(&self) -> usize {
        self.full.block_count()
    }

    /// Ambient dimension of the embedded cone: `2N + m + 2`.
    pub fn ambient_dim(&self) -> usize {
        self.full.ambient_dim()
    }
}
