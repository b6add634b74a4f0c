//! Tensor Gauss–Hermite grids and the cell-averaged Ornstein–Uhlenbeck operator.
//!
//! Each node owns a cell whose Gaussian mass equals the node's quadrature
//! weight (the Markov–Stieltjes partition of the line), so a grid function is
//! read as piecewise constant on cells. The operator below is the exact
//! cell average of `T_rho` applied to such functions; for sets that are unions
//! of cells, `sum_i f_i . W A f_i` is the exact continuum noise stability.

use super::Correlation;
use crate::error::{Error, Result};
use crate::par::{map_indexed, tree_sum};
use crate::special::{gauss_hermite_normal, gauss_legendre, norm_interval, norm_pdf, norm_quantile};
use std::sync::OnceLock;

/// Largest `|rho|` accepted by grid and quadrature paths.
pub const QUADRATURE_RHO_LIMIT: f64 = 0.9995;

#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    dim: usize,
    n: usize,
    nodes: Vec<f64>,
    axis_weights: Vec<f64>,
    bounds: Vec<f64>,
    full_weights: Vec<f64>,
}

impl PartialEq for QuadratureGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

impl QuadratureGrid {
    pub fn new(dim: usize, nodes_per_dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!("grid dimension {dim} outside 1..=3")));
        }
        if !(2..=512).contains(&nodes_per_dim) {
            return Err(Error::InvalidArgument(format!("nodes per dimension {nodes_per_dim} outside 2..=512")));
        }
        let n = nodes_per_dim;
        let (nodes, weights) = gauss_hermite_normal(n);
        let bounds = cell_bounds(&weights);
        let len = n.pow(dim as u32);
        let full_weights = (0..len)
            .map(|k| {
                let mut w = 1.0;
                let mut r = k;
                for _ in 0..dim {
                    w *= weights[r % n];
                    r /= n;
                }
                w
            })
            .collect();
        Ok(Self { dim, n, nodes, axis_weights: weights, bounds, full_weights })
    }

    /// 64 nodes per axis in one or two dimensions, 32 in three.
    pub fn default_nodes(dim: usize) -> usize {
        if dim >= 3 {
            32
        } else {
            64
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.full_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.full_weights.is_empty()
    }

    /// One-dimensional abscissae, ascending.
    pub fn abscissae(&self) -> &[f64] {
        &self.nodes
    }

    /// One-dimensional weights; they sum to one.
    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_weights
    }

    /// Cell boundaries `b_0 = -inf < b_1 < ... < b_n = +inf`.
    pub fn cell_bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// Tensor weights of all nodes in flat (row-major) order.
    pub fn weights(&self) -> &[f64] {
        &self.full_weights
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.full_weights[k]
    }

    /// Per-axis indices of flat node `k`; axis 0 varies slowest.
    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut r = k;
        for t in (0..self.dim).rev() {
            idx[t] = r % self.n;
            r /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn node(&self, k: usize) -> Vec<f64> {
        self.multi_index(k).into_iter().map(|i| self.nodes[i]).collect()
    }

    /// Flat index of the node at `-x` for the node at `x`.
    pub fn mirror(&self, k: usize) -> usize {
        let idx: Vec<usize> = self.multi_index(k).into_iter().map(|i| self.n - 1 - i).collect();
        self.flat_index(&idx)
    }

    /// Index of the cell containing `x` along one axis (closed on the left).
    pub fn cell_of(&self, x: f64) -> usize {
        let inner = &self.bounds[1..self.n];
        inner.partition_point(|b| *b <= x)
    }

    /// Flat index of the cell containing the point `x`.
    pub fn locate(&self, x: &[f64]) -> usize {
        x.iter().fold(0, |acc, &v| acc * self.n + self.cell_of(v))
    }

    /// `sum_k w_k v_k` in a fixed summation order.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let terms: Vec<f64> = self.full_weights.iter().zip(values).map(|(w, v)| w * v).collect();
        tree_sum(&terms)
    }

    /// Spacing of the two nodes nearest the origin.
    pub fn central_spacing(&self) -> f64 {
        let h = self.n / 2;
        self.nodes[h] - self.nodes[h - 1]
    }

    /// `E h(x + width Z)` at every node for the cellwise-constant `h`.
    pub fn blur(&self, values: &[f64], width: f64) -> Vec<f64> {
        let n = self.n;
        let mut mat = vec![0.0; n * n];
        for a in 0..n {
            for c in 0..n {
                let x = self.nodes[a];
                mat[a * n + c] = norm_interval((self.bounds[c] - x) / width, (self.bounds[c + 1] - x) / width);
            }
        }
        let mut cur = values.to_vec();
        for axis in 0..self.dim {
            cur = apply_axis(&mat, n, self.dim, &cur, axis);
        }
        cur
    }

    /// Continuum `T_rho h (x)` for the cellwise-constant function with node values `values`,
    /// together with its gradient in `x`.
    pub fn ou_pointwise(&self, values: &[f64], x: &[f64], rho: f64) -> (f64, Vec<f64>) {
        let d = self.dim;
        let n = self.n;
        let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
        let mut p = vec![vec![0.0; n]; d];
        let mut dp = vec![vec![0.0; n]; d];
        for t in 0..d {
            let c = rho * x[t];
            for a in 0..n {
                let lo = (self.bounds[a] - c) / s;
                let hi = (self.bounds[a + 1] - c) / s;
                p[t][a] = norm_interval(lo, hi);
                dp[t][a] = rho / s * (norm_pdf(lo) - norm_pdf(hi));
            }
        }
        let mut value = 0.0;
        let mut grad = vec![0.0; d];
        let mut idx = vec![0usize; d];
        for (k, &h) in values.iter().enumerate() {
            if h != 0.0 {
                let mut r = k;
                for t in (0..d).rev() {
                    idx[t] = r % n;
                    r /= n;
                }
                let mut prod = h;
                for t in 0..d {
                    prod *= p[t][idx[t]];
                }
                value += prod;
                for t in 0..d {
                    let mut g = h * dp[t][idx[t]];
                    for u in 0..d {
                        if u != t {
                            g *= p[u][idx[u]];
                        }
                    }
                    grad[t] += g;
                }
            }
        }
        (value, grad)
    }
}

/// Boundaries whose normal-CDF increments equal the weights.
fn cell_bounds(weights: &[f64]) -> Vec<f64> {
    let n = weights.len();
    let mut b = vec![0.0; n + 1];
    b[0] = f64::NEG_INFINITY;
    b[n] = f64::INFINITY;
    // Left half from cumulative sums, right half by symmetry.
    let mut acc = 0.0;
    for l in 1..=n / 2 {
        acc += weights[l - 1];
        b[l] = norm_quantile(acc);
    }
    for l in n.div_ceil(2)..n {
        b[l] = -b[n - l];
    }
    if n.is_multiple_of(2) {
        b[n / 2] = 0.0;
    }
    b
}

/// Cell-averaged `T_rho` on a tensor grid, applied one axis at a time.
#[derive(Debug, Clone)]
pub struct GridOperator {
    dim: usize,
    n: usize,
    rho: f64,
    trans: Vec<f64>,
    defect: f64,
}

impl GridOperator {
    pub fn new(grid: &QuadratureGrid, rho: Correlation) -> Result<Self> {
        let r = rho.value();
        if r.abs() >= QUADRATURE_RHO_LIMIT {
            return Err(Error::CorrelationNotAllowed { rho: r, reason: "grid operators require |rho| < 0.9995" });
        }
        let n = grid.n;
        let w = &grid.axis_weights;
        let b = &grid.bounds;
        let s = rho.complement();
        let mut mass = vec![0.0; n * n];
        if r == 0.0 {
            for a in 0..n {
                for c in 0..n {
                    mass[a * n + c] = w[a] * w[c];
                }
            }
        } else {
            let rows: Vec<Vec<f64>> = map_indexed(n, |a| {
                (a..n).map(|c| cell_pair_mass(b[a], b[a + 1], b[c], b[c + 1], r, s)).collect()
            });
            for (a, row) in rows.into_iter().enumerate() {
                for (off, v) in row.into_iter().enumerate() {
                    mass[a * n + a + off] = v;
                    mass[(a + off) * n + a] = v;
                }
            }
        }
        let mut trans = vec![0.0; n * n];
        let mut defect = 0.0;
        for a in 0..n {
            let row = &mass[a * n..(a + 1) * n];
            defect += (tree_sum(row) - w[a]).abs();
            for c in 0..n {
                trans[a * n + c] = row[c] / w[a];
            }
        }
        Ok(Self { dim: grid.dim, n, rho: r, trans, defect })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Total deviation of the one-dimensional cell masses from the weights,
    /// a measured bound on the operator's integration error.
    pub fn defect(&self) -> f64 {
        self.defect
    }

    /// One-dimensional transition matrix `A[a][c] = P(Y in I_c | X in I_a)`, row-major.
    pub fn transition(&self) -> &[f64] {
        &self.trans
    }

    /// Applies the operator to node values.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let mut cur = values.to_vec();
        for axis in 0..self.dim {
            cur = apply_axis(&self.trans, self.n, self.dim, &cur, axis);
        }
        cur
    }

    /// `sum_k w_k f_k (A g)_k`, the discrete form of `int f T_rho g dgamma`.
    pub fn bilinear(&self, grid: &QuadratureGrid, f: &[f64], g: &[f64]) -> f64 {
        let tg = self.apply(g);
        let terms: Vec<f64> = grid.full_weights.iter().zip(f).zip(&tg).map(|((w, a), b)| w * a * b).collect();
        tree_sum(&terms)
    }
}

/// Applies the `n x n` row-major matrix `mat` along one axis of a tensor grid.
fn apply_axis(mat: &[f64], n: usize, dim: usize, input: &[f64], axis: usize) -> Vec<f64> {
    let stride = n.pow((dim - 1 - axis) as u32);
    let lines = input.len() / n;
    let out_lines: Vec<Vec<f64>> = map_indexed(lines, |l| {
        let base = (l / stride) * stride * n + l % stride;
        let line: Vec<f64> = (0..n).map(|c| input[base + c * stride]).collect();
        (0..n).map(|a| mat[a * n..(a + 1) * n].iter().zip(&line).map(|(t, v)| t * v).sum()).collect()
    });
    let mut out = vec![0.0; input.len()];
    for (l, line) in out_lines.into_iter().enumerate() {
        let base = (l / stride) * stride * n + l % stride;
        for (c, v) in line.into_iter().enumerate() {
            out[base + c * stride] = v;
        }
    }
    out
}

fn legendre10() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(10))
}

/// `P(X in [la, ua], rho X + s Z in [lc, uc])` by composite Gauss–Legendre over `X`.
fn cell_pair_mass(la: f64, ua: f64, lc: f64, uc: f64, rho: f64, s: f64) -> f64 {
    const CUT: f64 = 40.0;
    let mut lo = la.max(-CUT);
    let mut hi = ua.min(CUT);
    if la == f64::NEG_INFINITY && hi < -1.0 {
        lo = hi - CUT / hi.abs();
    }
    if ua == f64::INFINITY && lo > 1.0 {
        hi = lo + CUT / lo;
    }
    if hi <= lo {
        return 0.0;
    }
    let mut cuts = vec![lo, hi];
    for v in [lc / rho, uc / rho] {
        if v.is_finite() && v > lo && v < hi {
            cuts.push(v);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rule = legendre10();
    let scale = (0.5 * s / rho.abs()).min(0.5);
    let mut total = 0.0;
    for piece in cuts.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        if b <= a {
            continue;
        }
        let mag = a.abs().max(b.abs()).max(1.0);
        let width = scale.min(1.0 / mag);
        let panels = ((b - a) / width).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let mid = a + h * (p as f64 + 0.5);
            let mut acc = 0.0;
            for (x, w) in rule.0.iter().zip(&rule.1) {
                let t = mid + 0.5 * h * x;
                let c = rho * t;
                acc += w * norm_pdf(t) * norm_interval((lc - c) / s, (uc - c) / s);
            }
            total += 0.5 * h * acc;
        }
    }
    total
}

/// `P(lo <= rho x + s Z <= hi)` for a single point, exposed for pointwise checks.
pub fn interval_transition(lo: f64, hi: f64, x: f64, rho: f64) -> f64 {
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    if s == 0.0 {
        return if x >= lo && x <= hi { 1.0 } else { 0.0 };
    }
    norm_interval((lo - rho * x) / s, (hi - rho * x) / s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for &(d, n) in &[(1usize, 64usize), (2, 64), (3, 32), (2, 7)] {
            let g = QuadratureGrid::new(d, n).unwrap();
            assert!((g.axis_weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((g.integrate(&vec![1.0; g.len()]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cells_interlace_nodes_and_match_weights() {
        for n in [8usize, 33, 64, 128] {
            let g = QuadratureGrid::new(1, n).unwrap();
            let b = g.cell_bounds();
            for a in 0..n {
                assert!(b[a] < g.abscissae()[a] && g.abscissae()[a] < b[a + 1], "n={n} a={a}");
                let mass = norm_interval(b[a], b[a + 1]);
                assert!(((mass - g.axis_weights()[a]) / g.axis_weights()[a]).abs() < 1e-9, "n={n} a={a}");
            }
        }
    }

    #[test]
    fn mirror_and_locate() {
        let g = QuadratureGrid::new(2, 6).unwrap();
        for k in 0..g.len() {
            let x = g.node(k);
            assert_eq!(g.locate(&x), k);
            let m = g.mirror(k);
            let y = g.node(m);
            assert!((x[0] + y[0]).abs() < 1e-12 && (x[1] + y[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_is_markov_and_symmetric() {
        let g = QuadratureGrid::new(1, 64).unwrap();
        for &r in &[0.1, 0.5, -0.7, 0.99] {
            let op = GridOperator::new(&g, Correlation::new(r).unwrap()).unwrap();
            let one = op.apply(&vec![1.0; 64]);
            for (a, v) in one.iter().enumerate() {
                assert!((v - 1.0).abs() < 1e-9, "rho={r} a={a} v={v}");
            }
            let t = op.transition();
            let w = g.axis_weights();
            for a in 0..64 {
                for c in 0..64 {
                    let l = w[a] * t[a * 64 + c];
                    let rr = w[c] * t[c * 64 + a];
                    assert!((l - rr).abs() <= 1e-15 * l.abs().max(rr.abs()) + 1e-300);
                }
            }
            assert!(op.defect() < 1e-10, "rho={r} defect={}", op.defect());
        }
    }

    #[test]
    fn halfspace_cells_give_sheppard_value() {
        let g = QuadratureGrid::new(2, 64).unwrap();
        let op = GridOperator::new(&g, Correlation::new(0.3).unwrap()).unwrap();
        let left: Vec<f64> = (0..g.len()).map(|k| if g.node(k)[0] < 0.0 { 1.0 } else { 0.0 }).collect();
        let right: Vec<f64> = left.iter().map(|v| 1.0 - v).collect();
        let s = op.bilinear(&g, &left, &left) + op.bilinear(&g, &right, &right);
        let expect = 0.5 + 0.3f64.asin() / std::f64::consts::PI;
        assert!((s - expect).abs() < 1e-11, "s={s}");
    }

    #[test]
    fn rejects_extreme_correlation() {
        let g = QuadratureGrid::new(1, 8).unwrap();
        assert!(GridOperator::new(&g, Correlation::new(0.9996).unwrap()).is_err());
    }

    #[test]
    fn pointwise_matches_finite_difference() {
        let g = QuadratureGrid::new(2, 8).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|k| ((k * 7) % 5) as f64 / 4.0).collect();
        let x = [0.3, -0.8];
        let (_, grad) = g.ou_pointwise(&vals, &x, 0.6);
        let h = 1e-6;
        for t in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[t] += h;
            xm[t] -= h;
            let fd = (g.ou_pointwise(&vals, &xp, 0.6).0 - g.ou_pointwise(&vals, &xm, 0.6).0) / (2.0 * h);
            assert!((fd - grad[t]).abs() < 1e-7);
        }
    }
}
