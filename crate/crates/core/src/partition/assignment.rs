//! Soft assignments `f : R^d -> Delta_m` on a quadrature grid and the
//! stability objective `C(f) = sum_i int f_i T_rho f_i dgamma`.

use crate::error::{Error, Result};
use crate::gaussian::{Correlation, GridOperator, Partition, QuadratureGrid, SimplexVector};
use crate::par::tree_sum;
use std::sync::Arc;

/// Largest allowed deviation of a node vector from the simplex.
pub const ASSIGNMENT_TOL: f64 = 1e-10;

/// A point of `Delta_m` at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment {
    grid: Arc<QuadratureGrid>,
    m: usize,
    /// Component-major: `values[i * len + k]` is `f_i` at node `k`.
    values: Vec<f64>,
}

impl SoftAssignment {
    /// Builds an assignment from component-major values.
    pub fn new(grid: Arc<QuadratureGrid>, m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("an assignment needs at least one component".into()));
        }
        if values.len() != m * grid.len() {
            return Err(Error::DimensionMismatch { expected: m * grid.len(), got: values.len() });
        }
        let len = grid.len();
        for k in 0..len {
            let mut sum = 0.0;
            for i in 0..m {
                let v = values[i * len + k];
                if !v.is_finite() || v < -ASSIGNMENT_TOL {
                    return Err(Error::InvalidSimplex(format!("node {k} has entry {v}")));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ASSIGNMENT_TOL {
                return Err(Error::InvalidSimplex(format!("node {k} sums to {sum}")));
            }
        }
        Ok(Self { grid, m, values })
    }

    pub(crate) fn from_raw(grid: Arc<QuadratureGrid>, m: usize, values: Vec<f64>) -> Self {
        Self { grid, m, values }
    }

    /// The same vector at every node.
    pub fn constant(grid: Arc<QuadratureGrid>, v: &SimplexVector) -> Self {
        let len = grid.len();
        let values = v.entries().iter().flat_map(|&a| std::iter::repeat_n(a, len)).collect();
        Self { grid, m: v.len(), values }
    }

    /// `e_{labels[k]}` at node `k`.
    pub fn from_labels(grid: Arc<QuadratureGrid>, labels: &[usize], m: usize) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: labels.len() });
        }
        let len = grid.len();
        let mut values = vec![0.0; m * len];
        for (k, &l) in labels.iter().enumerate() {
            if l >= m {
                return Err(Error::InvalidPartition(format!("label {l} outside 0..{m}")));
            }
            values[l * len + k] = 1.0;
        }
        Ok(Self { grid, m, values })
    }

    /// Indicator assignment of a grid partition.
    pub fn from_partition(p: &Partition) -> Result<Self> {
        let grid = p.common_grid().ok_or_else(|| Error::Unsupported("assignments need a grid partition".into()))?;
        let labels = p.labels().expect("grid partitions have labels");
        Self::from_labels(grid.clone(), &labels, p.m())
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `f_i` at every node.
    pub fn component(&self, i: usize) -> &[f64] {
        let len = self.len();
        &self.values[i * len..(i + 1) * len]
    }

    /// `f(x_k)`.
    pub fn node(&self, k: usize) -> Vec<f64> {
        let len = self.len();
        (0..self.m).map(|i| self.values[i * len + k]).collect()
    }

    /// Gaussian volumes `gamma(f_i)`.
    pub fn volumes(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.grid.integrate(self.component(i))).collect()
    }

    /// `t f + (1 - t) g`.
    pub fn mix(&self, other: &Self, t: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        Ok(Self { grid: self.grid.clone(), m: self.m, values })
    }

    /// Per node, the argmax coordinate with the lowest index on ties.
    pub fn argmax_labels(&self) -> Vec<usize> {
        let len = self.len();
        (0..len)
            .map(|k| {
                let mut best = 0;
                for i in 1..self.m {
                    if self.values[i * len + k] > self.values[best * len + k] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if *self.grid != *other.grid {
            return Err(Error::InvalidArgument("assignments live on different grids".into()));
        }
        if self.m != other.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: other.m });
        }
        Ok(())
    }
}

/// The objective with its grid operator built once.
#[derive(Debug, Clone)]
pub struct Objective {
    grid: Arc<QuadratureGrid>,
    op: GridOperator,
}

impl Objective {
    pub fn new(grid: Arc<QuadratureGrid>, rho: Correlation) -> Result<Self> {
        let op = GridOperator::new(&grid, rho)?;
        Ok(Self { grid, op })
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn operator(&self) -> &GridOperator {
        &self.op
    }

    fn check(&self, f: &SoftAssignment) -> Result<()> {
        if *f.grid != *self.grid {
            return Err(Error::DimensionMismatch { expected: self.grid.len(), got: f.len() });
        }
        Ok(())
    }

    /// `T_rho f_i` at every node, component-major.
    pub fn smooth(&self, f: &SoftAssignment) -> Result<Vec<f64>> {
        self.check(f)?;
        Ok((0..f.m).flat_map(|i| self.op.apply(f.component(i))).collect())
    }

    /// `C(f)`.
    pub fn value(&self, f: &SoftAssignment) -> Result<f64> {
        self.check(f)?;
        let parts: Vec<f64> = (0..f.m).map(|i| self.op.bilinear(&self.grid, f.component(i), f.component(i))).collect();
        Ok(tree_sum(&parts))
    }

    /// `C(f, g) = sum_i int f_i T_rho g_i dgamma`.
    pub fn bilinear(&self, f: &SoftAssignment, g: &SoftAssignment) -> Result<f64> {
        self.check(f)?;
        f.check_compatible(g)?;
        let parts: Vec<f64> = (0..f.m).map(|i| self.op.bilinear(&self.grid, f.component(i), g.component(i))).collect();
        Ok(tree_sum(&parts))
    }

    /// `dC / df_i(x_k) = 2 w_k (T_rho f_i)(x_k)`, component-major.
    pub fn gradient(&self, f: &SoftAssignment) -> Result<Vec<f64>> {
        let t = self.smooth(f)?;
        let w = self.grid.weights();
        let len = f.len();
        Ok(t.iter().enumerate().map(|(idx, v)| 2.0 * w[idx % len] * v).collect())
    }
}

/// `C(f)` for a single evaluation.
pub fn objective(f: &SoftAssignment, rho: Correlation) -> Result<f64> {
    Objective::new(f.grid.clone(), rho)?.value(f)
}

/// Rounds each node to its argmax vertex (lowest index on ties).
pub fn round_to_partition(f: &SoftAssignment) -> Result<Partition> {
    Partition::from_labels(f.grid.clone(), &f.argmax_labels(), f.m)
}
