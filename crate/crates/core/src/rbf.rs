//! Gaussian RBF network with centers on a regular lattice.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when deciding whether a grid time lies inside an averaging window.
const WINDOW_SLACK: f64 = 1e-9;

/// Serializable description of a lattice. Two lattices built from equal
/// descriptors are identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeDescriptor {
    pub dims: usize,
    pub nodes_per_dim: usize,
    pub ranges: Vec<[f64; 2]>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfLattice {
    descriptor: LatticeDescriptor,
    /// Row-major `node_count x dims`.
    centers: Vec<f64>,
    inv_width_sq: f64,
}

impl RbfLattice {
    /// Evenly spaced centers including both range endpoints, first dimension
    /// varying slowest.
    pub fn new(dims: usize, nodes_per_dim: usize, ranges: &[[f64; 2]], width: f64) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidLattice("dims must be >= 1".into()));
        }
        if nodes_per_dim < 2 {
            return Err(Error::InvalidLattice("nodes_per_dim must be >= 2".into()));
        }
        if ranges.len() != dims {
            return Err(Error::DimensionMismatch {
                context: "lattice ranges",
                expected: dims,
                got: ranges.len(),
            });
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidLattice(format!("width {width} must be > 0")));
        }
        for (dim, &[lo, hi]) in ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::DegenerateRange { dim, lo, hi });
            }
        }
        let count = nodes_per_dim
            .checked_pow(dims as u32)
            .ok_or_else(|| Error::InvalidLattice("lattice too large".into()))?;
        let axis = |d: usize, k: usize| {
            let [lo, hi] = ranges[d];
            lo + (hi - lo) * k as f64 / (nodes_per_dim - 1) as f64
        };
        let mut centers = Vec::with_capacity(count * dims);
        for index in 0..count {
            let mut rest = index;
            let mut digits = vec![0usize; dims];
            for d in (0..dims).rev() {
                digits[d] = rest % nodes_per_dim;
                rest /= nodes_per_dim;
            }
            centers.extend(digits.iter().enumerate().map(|(d, &k)| axis(d, k)));
        }
        Ok(Self {
            descriptor: LatticeDescriptor {
                dims,
                nodes_per_dim,
                ranges: ranges.to_vec(),
                width,
            },
            centers,
            inv_width_sq: 1.0 / (width * width),
        })
    }

    pub fn from_descriptor(d: &LatticeDescriptor) -> Result<Self> {
        Self::new(d.dims, d.nodes_per_dim, &d.ranges, d.width)
    }

    pub fn descriptor(&self) -> &LatticeDescriptor {
        &self.descriptor
    }

    pub fn dims(&self) -> usize {
        self.descriptor.dims
    }

    pub fn width(&self) -> f64 {
        self.descriptor.width
    }

    pub fn node_count(&self) -> usize {
        self.centers.len() / self.descriptor.dims
    }

    pub fn center(&self, k: usize) -> &[f64] {
        let d = self.descriptor.dims;
        &self.centers[k * d..(k + 1) * d]
    }

    pub fn regressor(&self, z: &[f64]) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.node_count());
        self.regressor_into(z, out.as_mut_slice())?;
        Ok(out)
    }

    /// `s_k = exp(-|z - mu_k|^2 / width^2)` written into `out`.
    pub fn regressor_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        let dims = self.descriptor.dims;
        if z.len() != dims {
            return Err(Error::DimensionMismatch {
                context: "regressor input",
                expected: dims,
                got: z.len(),
            });
        }
        if out.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                context: "regressor output",
                expected: self.node_count(),
                got: out.len(),
            });
        }
        for (s, mu) in out.iter_mut().zip(self.centers.chunks_exact(dims)) {
            let dist_sq: f64 = z.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            *s = (-dist_sq * self.inv_width_sq).exp();
        }
        Ok(())
    }

    /// `W^T S(z)`.
    pub fn evaluate(&self, weights: &WeightMatrix, z: &[f64]) -> Result<DVector<f64>> {
        weights.check_nodes(self.node_count())?;
        let s = self.regressor(z)?;
        Ok(weights.output(&s))
    }
}

/// Output weights, `node_count x outputs`. Column `j` drives output channel `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(pub DMatrix<f64>);

impl WeightMatrix {
    pub fn zeros(nodes: usize, outputs: usize) -> Self {
        Self(DMatrix::zeros(nodes, outputs))
    }

    pub fn nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.0.ncols()
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn output(&self, s: &DVector<f64>) -> DVector<f64> {
        self.0.tr_mul(s)
    }

    pub(crate) fn check_nodes(&self, nodes: usize) -> Result<()> {
        if self.nodes() != nodes {
            return Err(Error::DimensionMismatch {
                context: "weight matrix rows",
                expected: nodes,
                got: self.nodes(),
            });
        }
        Ok(())
    }
}

fn in_window(t: f64, t_a: f64, t_b: f64) -> bool {
    t >= t_a - WINDOW_SLACK && t <= t_b + WINDOW_SLACK
}

/// Arithmetic mean of the samples whose time lies in `[t_a, t_b]`.
pub fn time_average_weights(
    history: &[(f64, WeightMatrix)],
    t_a: f64,
    t_b: f64,
) -> Result<WeightMatrix> {
    let mut acc: Option<WindowAverage> = None;
    for (t, w) in history {
        acc.get_or_insert_with(|| WindowAverage::new(t_a, t_b, w.nodes(), w.outputs()))
            .push(*t, &w.0)?;
    }
    acc.ok_or(Error::EmptyWindow { t_a, t_b })?.finish()
}

/// Streaming version of [`time_average_weights`]; produces the same result for
/// the same sample sequence.
#[derive(Debug, Clone)]
pub struct WindowAverage {
    t_a: f64,
    t_b: f64,
    sum: DMatrix<f64>,
    count: usize,
}

impl WindowAverage {
    pub fn new(t_a: f64, t_b: f64, nodes: usize, outputs: usize) -> Self {
        Self {
            t_a,
            t_b,
            sum: DMatrix::zeros(nodes, outputs),
            count: 0,
        }
    }

    /// Adds a sample if `t` falls inside the window.
    pub fn push(&mut self, t: f64, w: &DMatrix<f64>) -> Result<()> {
        if w.shape() != self.sum.shape() {
            return Err(Error::DimensionMismatch {
                context: "weight sample",
                expected: self.sum.nrows(),
                got: w.nrows(),
            });
        }
        if in_window(t, self.t_a, self.t_b) {
            self.sum += w;
            self.count += 1;
        }
        Ok(())
    }

    /// Column-major slice variant of [`WindowAverage::push`].
    pub fn push_slice(&mut self, t: f64, w: &[f64]) {
        if in_window(t, self.t_a, self.t_b) {
            for (acc, x) in self.sum.as_mut_slice().iter_mut().zip(w) {
                *acc += x;
            }
            self.count += 1;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(self) -> Result<WeightMatrix> {
        if !(self.t_b > self.t_a && self.t_a >= 0.0) || self.count == 0 {
            return Err(Error::EmptyWindow {
                t_a: self.t_a,
                t_b: self.t_b,
            });
        }
        Ok(WeightMatrix(self.sum / self.count as f64))
    }
}
