//! Interface meshes `Sigma_ij` between the sets of a partition.
//!
//! Halfspace and simplex-cone partitions get exact meshes built from
//! composite Gauss–Legendre rules along their flat pieces. Grid partitions are
//! contoured by marching squares on the set indicators blurred at the grid's
//! central spacing, so that interfaces follow the staircase of cells without
//! inheriting its axis-aligned normals.

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_density, Partition, QuadratureGrid, Region};
use crate::special::gauss_legendre;
use std::sync::Arc;

/// Half-length of the truncated flat interfaces.
pub const MESH_RADIUS: f64 = 12.0;

/// One quadrature element of an interface.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshElement {
    pub point: Vec<f64>,
    /// Unit normal pointing from the first set of the pair into the second.
    pub normal: Vec<f64>,
    /// Surface measure of the element (1 for points in `R^1`).
    pub length: f64,
    /// `length * gamma_d(point)`.
    pub weight: f64,
}

/// Mesh of `Sigma_ij` for `i < j` (zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMesh {
    pub pair: (usize, usize),
    pub elements: Vec<MeshElement>,
}

impl InterfaceMesh {
    /// The same interface seen from the second set: `N_ji = -N_ij`.
    pub fn reversed(&self) -> Self {
        Self {
            pair: (self.pair.1, self.pair.0),
            elements: self
                .elements
                .iter()
                .map(|e| MeshElement { normal: e.normal.iter().map(|v| -v).collect(), ..e.clone() })
                .collect(),
        }
    }

    /// Gaussian-weighted surface measure.
    pub fn total_weight(&self) -> f64 {
        self.elements.iter().map(|e| e.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

fn element(point: Vec<f64>, normal: Vec<f64>, length: f64) -> MeshElement {
    let weight = length * gaussian_density(&point);
    MeshElement { point, normal, length, weight }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let l = dot(v, v).sqrt();
    if l > 0.0 {
        v.iter_mut().for_each(|x| *x /= l);
    }
    l
}

/// Orthonormal vectors completing `given` to a basis of `R^d`.
fn complement(given: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for g in given {
        let mut u = g.clone();
        for b in &basis {
            let c = dot(&u, b);
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        if normalize(&mut u) > 1e-8 {
            basis.push(u);
        }
    }
    let mut out = Vec::new();
    for axis in 0..d {
        let mut u = vec![0.0; d];
        u[axis] = 1.0;
        for b in &basis {
            let c = dot(&u, b);
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        if normalize(&mut u) > 1e-8 && basis.len() < d {
            basis.push(u.clone());
            out.push(u);
        }
    }
    out
}

/// Composite 10-point Gauss–Legendre nodes and weights on `[a, b]`.
fn line_rule(a: f64, b: f64, width: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(10);
    let panels = ((b - a) / width).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * 10);
    for p in 0..panels {
        let mid = a + h * (p as f64 + 0.5);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + 0.5 * h * xi, 0.5 * h * wi));
        }
    }
    out
}

/// Points `base + sum_t s_t dirs[t]` with `s_t` running over the given rules.
fn flat_piece(base: &[f64], dirs: &[Vec<f64>], rules: &[Vec<(f64, f64)>], normal: &[f64]) -> Vec<MeshElement> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; dirs.len()];
    if rules.iter().any(|r| r.is_empty()) {
        return out;
    }
    loop {
        let mut p = base.to_vec();
        let mut len = 1.0;
        for (t, dir) in dirs.iter().enumerate() {
            let (s, w) = rules[t][idx[t]];
            p.iter_mut().zip(dir).for_each(|(x, e)| *x += s * e);
            len *= w;
        }
        out.push(element(p, normal.to_vec(), len));
        let mut t = 0;
        loop {
            if t == dirs.len() {
                return out;
            }
            idx[t] += 1;
            if idx[t] < rules[t].len() {
                break;
            }
            idx[t] = 0;
            t += 1;
        }
    }
}

fn panel_width(d: usize) -> f64 {
    if d <= 2 {
        0.25
    } else {
        1.0
    }
}

enum Shape {
    Halfspace { normal: Vec<f64>, offset: f64 },
    Cones { vertices: Vec<Vec<f64>>, apex: Vec<f64> },
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

fn analytic_shape(p: &Partition) -> Option<Shape> {
    let sets: Vec<Region> = p.sets().iter().map(Region::canonical).collect();
    match sets.as_slice() {
        [Region::Halfspace { normal: n0, offset: c0 }, Region::Halfspace { normal: n1, offset: c1 }] => {
            let neg: Vec<f64> = n1.iter().map(|v| -v).collect();
            (close(n0, &neg) && (c0 + c1).abs() < 1e-12).then(|| Shape::Halfspace { normal: n0.clone(), offset: *c0 })
        }
        [Region::SimplexCone(a), Region::SimplexCone(b), Region::SimplexCone(c)] => {
            let same = |x: &crate::gaussian::Cone| x.vertices() == a.vertices() && x.apex() == a.apex();
            (a.m() == 3 && same(b) && same(c) && a.index() == 0 && b.index() == 1 && c.index() == 2)
                .then(|| Shape::Cones { vertices: a.vertices().to_vec(), apex: a.apex().to_vec() })
        }
        _ => None,
    }
}

fn halfspace_mesh(normal: &[f64], offset: f64) -> Vec<InterfaceMesh> {
    let d = normal.len();
    let base: Vec<f64> = normal.iter().map(|v| v * offset).collect();
    let dirs = complement(&[normal.to_vec()], d);
    let reach = MESH_RADIUS + offset.abs();
    let rules: Vec<Vec<(f64, f64)>> = dirs.iter().map(|_| line_rule(-reach, reach, panel_width(d))).collect();
    vec![InterfaceMesh { pair: (0, 1), elements: flat_piece(&base, &dirs, &rules, normal) }]
}

fn cone_mesh(vertices: &[Vec<f64>], apex: &[f64]) -> Vec<InterfaceMesh> {
    let d = apex.len();
    let reach = MESH_RADIUS + dot(apex, apex).sqrt();
    let width = panel_width(d);
    let mut out = Vec::new();
    for (i, j, k) in [(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)] {
        let ray: Vec<f64> = vertices[k].iter().map(|v| -v).collect();
        let mut n: Vec<f64> = vertices[j].iter().zip(&vertices[i]).map(|(a, b)| a - b).collect();
        normalize(&mut n);
        let mut dirs = vec![ray.clone()];
        let extra = complement(&[vertices[0].clone(), vertices[1].clone()], d);
        let mut rules = vec![line_rule(0.0, reach, width)];
        for e in extra {
            dirs.push(e);
            rules.push(line_rule(-reach, reach, width));
        }
        out.push(InterfaceMesh { pair: (i, j), elements: flat_piece(apex, &dirs, &rules, &n) });
    }
    out
}

/// Blurred indicators of each set and the argmax labels of the blurred field.
pub(crate) struct BlurredLabels {
    pub fields: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub(crate) fn blurred_labels(grid: &QuadratureGrid, labels: &[usize], m: usize) -> BlurredLabels {
    let width = grid.central_spacing();
    let fields: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let ind: Vec<f64> = labels.iter().map(|&l| if l == i { 1.0 } else { 0.0 }).collect();
            grid.blur(&ind, width)
        })
        .collect();
    let labels = (0..grid.len())
        .map(|k| {
            let mut best = 0;
            for i in 1..m {
                if fields[i][k] > fields[best][k] {
                    best = i;
                }
            }
            best
        })
        .collect();
    BlurredLabels { fields, labels }
}

/// Segment endpoints and the pair it separates.
type Segment = (Vec<f64>, Vec<f64>, (usize, usize));

#[derive(Debug, Clone)]
struct Crossing {
    point: Vec<f64>,
    pair: (usize, usize),
}

fn edge_crossing(b: &BlurredLabels, p: usize, q: usize, xp: &[f64], xq: &[f64]) -> Option<Crossing> {
    let (i, j) = (b.labels[p], b.labels[q]);
    if i == j {
        return None;
    }
    let gp = b.fields[i][p] - b.fields[j][p];
    let gq = b.fields[i][q] - b.fields[j][q];
    let t = if gp - gq > 0.0 { (gp / (gp - gq)).clamp(0.0, 1.0) } else { 0.5 };
    let point = xp.iter().zip(xq).map(|(a, c)| a + t * (c - a)).collect();
    Some(Crossing { point, pair: (i.min(j), i.max(j)) })
}

fn grid_mesh_1d(grid: &QuadratureGrid, b: &BlurredLabels, m: usize) -> Vec<InterfaceMesh> {
    let x = grid.abscissae();
    let mut meshes = empty_meshes(m);
    for a in 0..grid.nodes_per_dim() - 1 {
        if let Some(c) = edge_crossing(b, a, a + 1, &[x[a]], &[x[a + 1]]) {
            let sign = if b.labels[a] == c.pair.0 { 1.0 } else { -1.0 };
            push(&mut meshes, m, c.pair, element(c.point, vec![sign], 1.0));
        }
    }
    meshes
}

fn empty_meshes(m: usize) -> Vec<InterfaceMesh> {
    let mut out = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            out.push(InterfaceMesh { pair: (i, j), elements: Vec::new() });
        }
    }
    out
}

fn pair_slot(m: usize, (i, j): (usize, usize)) -> usize {
    i * m - i * (i + 1) / 2 + (j - i - 1)
}

fn push(meshes: &mut [InterfaceMesh], m: usize, pair: (usize, usize), e: MeshElement) {
    meshes[pair_slot(m, pair)].elements.push(e);
}

fn grid_mesh_2d(grid: &QuadratureGrid, b: &BlurredLabels, m: usize) -> Vec<InterfaceMesh> {
    let n = grid.nodes_per_dim();
    let x = grid.abscissae();
    let mut meshes = empty_meshes(m);
    for a in 0..n - 1 {
        for c in 0..n - 1 {
            let corners = [(a, c), (a + 1, c), (a + 1, c + 1), (a, c + 1)];
            let ids: Vec<usize> = corners.iter().map(|(u, v)| u * n + v).collect();
            let pts: Vec<[f64; 2]> = corners.iter().map(|(u, v)| [x[*u], x[*v]]).collect();
            let crossings: Vec<Crossing> = (0..4)
                .filter_map(|e| {
                    let (p, q) = (e, (e + 1) % 4);
                    edge_crossing(b, ids[p], ids[q], &pts[p], &pts[q])
                })
                .collect();
            let segments: Vec<Segment> = match crossings.len() {
                0 | 1 => Vec::new(),
                2 => vec![(crossings[0].point.clone(), crossings[1].point.clone(), crossings[0].pair)],
                k => {
                    let mut centre = vec![0.0; 2];
                    for cr in &crossings {
                        centre[0] += cr.point[0] / k as f64;
                        centre[1] += cr.point[1] / k as f64;
                    }
                    crossings.iter().map(|cr| (cr.point.clone(), centre.clone(), cr.pair)).collect()
                }
            };
            let (dx, dy) = (x[a + 1] - x[a], x[c + 1] - x[c]);
            for (p, q, pair) in segments {
                let seg = [q[0] - p[0], q[1] - p[1]];
                let len = (seg[0] * seg[0] + seg[1] * seg[1]).sqrt();
                if len < 1e-14 {
                    continue;
                }
                let g: Vec<f64> = ids.iter().map(|&k| b.fields[pair.0][k] - b.fields[pair.1][k]).collect();
                let gx = ((g[1] - g[0]) + (g[2] - g[3])) / (2.0 * dx);
                let gy = ((g[3] - g[0]) + (g[2] - g[1])) / (2.0 * dy);
                let mut nrm = vec![-seg[1] / len, seg[0] / len];
                if nrm[0] * gx + nrm[1] * gy > 0.0 {
                    nrm.iter_mut().for_each(|v| *v = -*v);
                }
                let mid = vec![0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                push(&mut meshes, m, pair, element(mid, nrm, len));
            }
        }
    }
    meshes
}

/// Interface meshes for every pair of sets that share a boundary.
///
/// Supported: halfspace pairs and three simplex cones in any dimension up
/// to 3, and grid partitions in dimensions 1 and 2. Grid partitions in three
/// dimensions are not meshed; [`normal_samples`] covers them.
pub fn extract_interfaces(p: &Partition) -> Result<Vec<InterfaceMesh>> {
    if let Some(shape) = analytic_shape(p) {
        return Ok(match shape {
            Shape::Halfspace { normal, offset } => halfspace_mesh(&normal, offset),
            Shape::Cones { vertices, apex } => cone_mesh(&vertices, &apex),
        });
    }
    let grid = grid_of(p)?;
    let labels = p.labels().expect("grid partitions have labels");
    let b = blurred_labels(grid, &labels, p.m());
    let meshes = match grid.dim() {
        1 => grid_mesh_1d(grid, &b, p.m()),
        2 => grid_mesh_2d(grid, &b, p.m()),
        _ => return Err(Error::Unsupported("interface meshes for three-dimensional grid partitions".into())),
    };
    Ok(meshes.into_iter().filter(|m| !m.is_empty()).collect())
}

fn grid_of(p: &Partition) -> Result<&Arc<QuadratureGrid>> {
    p.common_grid().ok_or_else(|| {
        Error::Unsupported("interfaces are available for halfspace pairs, three simplex cones and grid partitions".into())
    })
}

/// A weighted interface normal, oriented from `pair.0` into `pair.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSample {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub weight: f64,
    pub pair: (usize, usize),
}

fn dual_widths(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|a| match a {
            0 => x[1] - x[0],
            _ if a == n - 1 => x[n - 1] - x[n - 2],
            _ => 0.5 * (x[a + 1] - x[a - 1]),
        })
        .collect()
}

/// Gradient of a node field by central differences (one-sided at the ends).
fn node_gradient(grid: &QuadratureGrid, field: &[f64], k: usize) -> Vec<f64> {
    let n = grid.nodes_per_dim();
    let x = grid.abscissae();
    let idx = grid.multi_index(k);
    (0..grid.dim())
        .map(|t| {
            let lo = idx[t].saturating_sub(1);
            let hi = (idx[t] + 1).min(n - 1);
            let mut a = idx.clone();
            a[t] = lo;
            let mut c = idx.clone();
            c[t] = hi;
            (field[grid.flat_index(&c)] - field[grid.flat_index(&a)]) / (x[hi] - x[lo])
        })
        .collect()
}

/// Interface normals with Gaussian surface weights for any partition.
///
/// Meshable partitions return their mesh elements. Grid partitions in three
/// dimensions are sampled at the crossings of grid edges, with normals from
/// finite differences of the blurred indicator field; a crossing on an edge
/// along axis `t` carries weight `gamma(x) |N_t| A_t`, where `A_t` is the dual
/// cell area transverse to `t`.
pub fn normal_samples(p: &Partition) -> Result<Vec<NormalSample>> {
    if p.dim() <= 2 || analytic_shape(p).is_some() {
        let meshes = extract_interfaces(p)?;
        return Ok(meshes
            .iter()
            .flat_map(|m| {
                m.elements
                    .iter()
                    .map(|e| NormalSample { point: e.point.clone(), normal: e.normal.clone(), weight: e.weight, pair: m.pair })
            })
            .collect());
    }
    let grid = grid_of(p)?;
    let labels = p.labels().expect("grid partitions have labels");
    let b = blurred_labels(grid, &labels, p.m());
    let n = grid.nodes_per_dim();
    let d = grid.dim();
    let widths = dual_widths(grid.abscissae());
    let mut out = Vec::new();
    for k in 0..grid.len() {
        let idx = grid.multi_index(k);
        for t in 0..d {
            if idx[t] + 1 >= n {
                continue;
            }
            let mut nb = idx.clone();
            nb[t] += 1;
            let q = grid.flat_index(&nb);
            let Some(c) = edge_crossing(&b, k, q, &grid.node(k), &grid.node(q)) else { continue };
            let g: Vec<f64> = b.fields[c.pair.0].iter().zip(&b.fields[c.pair.1]).map(|(u, v)| u - v).collect();
            let (gp, gq) = (node_gradient(grid, &g, k), node_gradient(grid, &g, q));
            let s = (c.point[t] - grid.node(k)[t]) / (grid.node(q)[t] - grid.node(k)[t]);
            let mut nrm: Vec<f64> = gp.iter().zip(&gq).map(|(u, v)| -((1.0 - s) * u + s * v)).collect();
            if normalize(&mut nrm) == 0.0 {
                continue;
            }
            let area: f64 = (0..d).filter(|&u| u != t).map(|u| widths[idx[u]]).product();
            let weight = gaussian_density(&c.point) * nrm[t].abs() * area;
            out.push(NormalSample { point: c.point, normal: nrm, weight, pair: c.pair });
        }
    }
    Ok(out)
}

/// Two-dimensional meshes as CSV with header `x,y,nx,ny,weight,pair`; pairs
/// are written one-based as `i-j`.
pub fn mesh_csv(meshes: &[InterfaceMesh]) -> Result<String> {
    let mut out = String::from("x,y,nx,ny,weight,pair\n");
    for m in meshes {
        for e in &m.elements {
            if e.point.len() != 2 {
                return Err(Error::Unsupported("CSV export is for two-dimensional meshes".into()));
            }
            out.push_str(&format!(
                "{},{},{},{},{},{}-{}\n",
                e.point[0],
                e.point[1],
                e.normal[0],
                e.normal[1],
                e.weight,
                m.pair.0 + 1,
                m.pair.1 + 1
            ));
        }
    }
    Ok(out)
}
