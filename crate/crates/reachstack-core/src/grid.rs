//! Regular rectilinear N-D grids holding sampled scalar fields, with
//! multilinear interpolation and central-difference gradients.
//!
//! Conventions:
//! - node spacing is `(upper - lower) / (nodes - 1)` in every dimension;
//! - data is row-major in dimension order (last dimension contiguous);
//! - queries outside the extent clamp to the boundary on non-periodic
//!   dimensions and wrap on periodic ones (a periodic dimension identifies
//!   `upper` with `lower`);
//! - gradients are central differences at nodes, one-sided at non-periodic
//!   boundaries, multilinearly interpolated between nodes.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;

/// Hard cap on dimensionality so query scratch space lives on the stack.
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridError {
    DimensionMismatch { expected: usize, got: usize },
    InvalidSpec(String),
    NonFiniteData,
}

impl core::fmt::Display for GridError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GridError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            GridError::InvalidSpec(msg) => write!(f, "invalid grid spec: {msg}"),
            GridError::NonFiniteData => write!(f, "table contains non-finite values"),
        }
    }
}

impl core::error::Error for GridError {}

/// Extents and resolution of a regular grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    node_counts: Vec<usize>,
    periodic: Vec<bool>,
    #[cfg_attr(feature = "serde", serde(skip))]
    spacing: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    strides: Vec<usize>,
}

impl GridSpec {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        node_counts: Vec<usize>,
        periodic: Vec<bool>,
    ) -> Result<Self, GridError> {
        let dim = lower.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(GridError::InvalidSpec(String::from(
                "dimension count must be in 1..=8",
            )));
        }
        if upper.len() != dim || node_counts.len() != dim || periodic.len() != dim {
            return Err(GridError::DimensionMismatch {
                expected: dim,
                got: upper.len().max(node_counts.len()).max(periodic.len()),
            });
        }
        let mut spacing = Vec::with_capacity(dim);
        for d in 0..dim {
            if !(lower[d] < upper[d]) || !lower[d].is_finite() || !upper[d].is_finite() {
                return Err(GridError::InvalidSpec(String::from(
                    "lower bound must be finite and strictly below upper",
                )));
            }
            if node_counts[d] < 2 {
                return Err(GridError::InvalidSpec(String::from(
                    "each dimension needs at least 2 nodes",
                )));
            }
            let h = (upper[d] - lower[d]) / (node_counts[d] - 1) as f64;
            if !(h > 0.0) {
                return Err(GridError::InvalidSpec(String::from(
                    "node spacing must be strictly positive",
                )));
            }
            spacing.push(h);
        }
        let mut strides = alloc::vec![0usize; dim];
        let mut acc = 1usize;
        for d in (0..dim).rev() {
            strides[d] = acc;
            acc = acc
                .checked_mul(node_counts[d])
                .ok_or(GridError::InvalidSpec(String::from("grid too large")))?;
        }
        Ok(GridSpec {
            lower,
            upper,
            node_counts,
            periodic,
            spacing,
            strides,
        })
    }

    /// Rebuild derived fields after deserialization.
    pub fn revalidate(self) -> Result<Self, GridError> {
        GridSpec::new(self.lower, self.upper, self.node_counts, self.periodic)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.node_counts
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.node_counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `i` along dimension `d`.
    pub fn node_coord(&self, d: usize, i: usize) -> f64 {
        self.lower[d] + i as f64 * self.spacing[d]
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.strides)
            .map(|(i, s)| i * s)
            .sum()
    }

    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for d in 0..self.dim() {
            out[d] = flat / self.strides[d];
            flat %= self.strides[d];
        }
    }

    /// Fill `out` with the coordinates of the node at multi-index `idx`.
    pub fn node_coords(&self, idx: &[usize], out: &mut [f64]) {
        for d in 0..self.dim() {
            out[d] = self.node_coord(d, idx[d]);
        }
    }

    /// Map a query component into the covered range: wrap on periodic
    /// dimensions, clamp otherwise.
    pub fn canonicalize(&self, d: usize, x: f64) -> f64 {
        if self.periodic[d] {
            self.lower[d] + math::rem_euclid(x - self.lower[d], self.upper[d] - self.lower[d])
        } else {
            x.clamp(self.lower[d], self.upper[d])
        }
    }

    /// Cell index and fractional offset of a (canonicalized) query.
    ///
    /// A query sitting bit-exactly on a node coordinate yields a fraction of
    /// exactly 0.0 or 1.0, which keeps interpolation exact at nodes.
    fn locate(&self, d: usize, x: f64) -> (usize, f64) {
        let x = self.canonicalize(d, x);
        let h = self.spacing[d];
        let max_cell = self.node_counts[d] - 2;
        let s = (x - self.lower[d]) / h;
        let mut cell = math::floor(s) as usize;
        if cell > max_cell {
            cell = max_cell;
        }
        let mut t = (x - self.node_coord(d, cell)) / h;
        if x == self.node_coord(d, cell + 1) {
            t = 1.0;
        }
        (cell, t.clamp(0.0, 1.0))
    }

    fn check_dim(&self, got: usize) -> Result<(), GridError> {
        if got != self.dim() {
            Err(GridError::DimensionMismatch {
                expected: self.dim(),
                got,
            })
        } else {
            Ok(())
        }
    }
}

/// A scalar field sampled on a [`GridSpec`], tagged with the horizon it was
/// solved to. Immutable after construction; concurrent reads are safe.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    spec: GridSpec,
    horizon_tau: f64,
    data: Vec<f64>,
}

impl ValueTable {
    pub fn new(spec: GridSpec, horizon_tau: f64, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != spec.len() {
            return Err(GridError::InvalidSpec(String::from(
                "data length does not match node count",
            )));
        }
        if !(horizon_tau >= 0.0) {
            return Err(GridError::InvalidSpec(String::from(
                "horizon must be nonnegative",
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GridError::NonFiniteData);
        }
        Ok(ValueTable {
            spec,
            horizon_tau,
            data,
        })
    }

    /// Sample `f` at every node.
    pub fn from_fn(
        spec: GridSpec,
        horizon_tau: f64,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self, GridError> {
        let dim = spec.dim();
        let mut idx = [0usize; MAX_DIM];
        let mut coords = [0.0f64; MAX_DIM];
        let mut data = Vec::with_capacity(spec.len());
        for _ in 0..spec.len() {
            spec.node_coords(&idx[..dim], &mut coords[..dim]);
            data.push(f(&coords[..dim]));
            // Row-major increment, last dimension fastest.
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < spec.node_counts()[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        ValueTable::new(spec, horizon_tau, data)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn horizon_tau(&self) -> f64 {
        self.horizon_tau
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest difference quotient between adjacent nodes over all
    /// dimensions; a Lipschitz constant for the interpolant.
    pub fn max_difference_quotient(&self) -> f64 {
        let dim = self.spec.dim();
        let mut worst = 0.0f64;
        let mut idx = [0usize; MAX_DIM];
        for flat in 0..self.data.len() {
            self.spec.unflatten(flat, &mut idx[..dim]);
            for d in 0..dim {
                if idx[d] + 1 < self.spec.node_counts()[d] {
                    let q = math::abs(
                        self.data[flat + self.spec.strides()[d]] - self.data[flat],
                    ) / self.spec.spacing()[d];
                    worst = worst.max(q);
                }
            }
        }
        worst
    }

    /// Multilinear interpolation of the stored field at `x`.
    ///
    /// Out-of-range components clamp (or wrap, when periodic); the result at
    /// a node coordinate is the stored node value exactly.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64, GridError> {
        self.spec.check_dim(x.len())?;
        let dim = self.spec.dim();
        let mut cell = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for d in 0..dim {
            let (c, t) = self.spec.locate(d, x[d]);
            cell[d] = c;
            frac[d] = t;
        }
        let base = self.spec.flat_index(&cell[..dim]);
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut flat = base;
            for d in 0..dim {
                if corner >> d & 1 == 1 {
                    w *= frac[d];
                    flat += self.spec.strides()[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            acc += w * self.data[flat];
        }
        Ok(acc)
    }

    /// Central-difference gradient component at a node.
    ///
    /// One-sided at non-periodic boundaries; wraps across the identified
    /// `upper == lower` seam on periodic dimensions.
    fn node_gradient_component(&self, node_idx: &[usize], flat: usize, d: usize) -> f64 {
        let n = self.spec.node_counts()[d];
        let stride = self.spec.strides()[d];
        let h = self.spec.spacing()[d];
        let i = node_idx[d];
        if self.spec.periodic()[d] {
            let left = if i == 0 { flat + (n - 2) * stride } else { flat - stride };
            let right = if i == n - 1 { flat - (n - 2) * stride } else { flat + stride };
            (self.data[right] - self.data[left]) / (2.0 * h)
        } else if i == 0 {
            (self.data[flat + stride] - self.data[flat]) / h
        } else if i == n - 1 {
            (self.data[flat] - self.data[flat - stride]) / h
        } else {
            (self.data[flat + stride] - self.data[flat - stride]) / (2.0 * h)
        }
    }

    /// Gradient at `x`: node central differences, multilinearly interpolated.
    ///
    /// Computes node gradients on the fly; for query-heavy paths precompute
    /// them once with [`ValueTable::precompute_gradients`].
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<(), GridError> {
        self.spec.check_dim(x.len())?;
        self.spec.check_dim(out.len())?;
        let dim = self.spec.dim();
        let mut cell = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for d in 0..dim {
            let (c, t) = self.spec.locate(d, x[d]);
            cell[d] = c;
            frac[d] = t;
        }
        let base = self.spec.flat_index(&cell[..dim]);
        out.fill(0.0);
        let mut node_idx = [0usize; MAX_DIM];
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut flat = base;
            for d in 0..dim {
                if corner >> d & 1 == 1 {
                    w *= frac[d];
                    flat += self.spec.strides()[d];
                    node_idx[d] = cell[d] + 1;
                } else {
                    w *= 1.0 - frac[d];
                    node_idx[d] = cell[d];
                }
            }
            for d in 0..dim {
                out[d] += w * self.node_gradient_component(&node_idx[..dim], flat, d);
            }
        }
        Ok(())
    }

    /// Precompute per-node gradients for fast repeated queries.
    pub fn precompute_gradients(&self) -> NodeGradients {
        let dim = self.spec.dim();
        let len = self.data.len();
        let mut data = alloc::vec![0.0f64; len * dim];

        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let spec = &self.spec;
            data.par_chunks_mut(dim * 4096)
                .enumerate()
                .for_each(|(chunk_i, chunk)| {
                    let mut idx = [0usize; MAX_DIM];
                    let start = chunk_i * 4096;
                    for (k, slot) in chunk.chunks_exact_mut(dim).enumerate() {
                        let flat = start + k;
                        spec.unflatten(flat, &mut idx[..dim]);
                        for d in 0..dim {
                            slot[d] = self.node_gradient_component(&idx[..dim], flat, d);
                        }
                    }
                });
        }
        #[cfg(not(feature = "parallel"))]
        {
            let mut idx = [0usize; MAX_DIM];
            for flat in 0..len {
                self.spec.unflatten(flat, &mut idx[..dim]);
                for d in 0..dim {
                    data[flat * dim + d] =
                        self.node_gradient_component(&idx[..dim], flat, d);
                }
            }
        }

        NodeGradients {
            spec: self.spec.clone(),
            data,
        }
    }
}

/// Per-node gradient field of a [`ValueTable`], stored node-major.
#[derive(Debug, Clone)]
pub struct NodeGradients {
    spec: GridSpec,
    data: Vec<f64>,
}

impl NodeGradients {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn node(&self, flat: usize) -> &[f64] {
        let dim = self.spec.dim();
        &self.data[flat * dim..(flat + 1) * dim]
    }

    /// Interpolated gradient at `x`; matches [`ValueTable::gradient`] exactly.
    pub fn interpolate(&self, x: &[f64], out: &mut [f64]) -> Result<(), GridError> {
        self.spec.check_dim(x.len())?;
        self.spec.check_dim(out.len())?;
        let dim = self.spec.dim();
        let mut cell = [0usize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for d in 0..dim {
            let (c, t) = self.spec.locate(d, x[d]);
            cell[d] = c;
            frac[d] = t;
        }
        let base = self.spec.flat_index(&cell[..dim]);
        out.fill(0.0);
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut flat = base;
            for d in 0..dim {
                if corner >> d & 1 == 1 {
                    w *= frac[d];
                    flat += self.spec.strides()[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            let g = &self.data[flat * dim..flat * dim + dim];
            for d in 0..dim {
                out[d] += w * g[d];
            }
        }
        Ok(())
    }
}
