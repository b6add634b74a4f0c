//! Regions of `R^d` and partitions into them, with the JSON document format.

use super::grid::QuadratureGrid;
use super::stability::gaussian_volume;
use super::SimplexVector;
use crate::error::{Error, Result};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

const UNIT_TOL: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Unit vertices of a regular simplex centred at the origin, spanning the
/// first `m - 1` coordinates of `R^d`.
pub fn simplex_vertices(m: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    if m < 2 || m - 1 > d {
        return Err(Error::InvalidArgument(format!("a regular simplex with {m} vertices needs 2 <= m <= d + 1 (d = {d})")));
    }
    let mut out = vec![vec![0.0; d]; m];
    if m == 2 {
        out[0][0] = 1.0;
        out[1][0] = -1.0;
        return Ok(out);
    }
    if m == 3 {
        for (k, v) in out.iter_mut().enumerate() {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            v[0] = a.cos();
            v[1] = a.sin();
        }
        return Ok(out);
    }
    // Centered standard basis of R^m, expressed in an orthonormal basis of the
    // sum-zero hyperplane.
    let mf = m as f64;
    let centered: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 - 1.0 / mf } else { -1.0 / mf }).collect())
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in &centered {
        let mut u = v.clone();
        for b in &basis {
            let c = dot(&u, b);
            for (x, y) in u.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        let nu = norm(&u);
        if nu > 1e-9 && basis.len() < m - 1 {
            basis.push(u.iter().map(|x| x / nu).collect());
        }
    }
    for (i, v) in centered.iter().enumerate() {
        let nv = norm(v);
        for (t, b) in basis.iter().enumerate() {
            out[i][t] = dot(v, b) / nv;
        }
    }
    Ok(out)
}

/// The cone `w + {x : <x, z_i> = max_j <x, z_j>}` over a regular simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone {
    vertices: Vec<Vec<f64>>,
    index: usize,
    apex: Vec<f64>,
}

impl Cone {
    /// `index` is zero-based; `apex` defaults to the origin.
    pub fn new(vertices: Vec<Vec<f64>>, index: usize, apex: Option<Vec<f64>>) -> Result<Self> {
        let m = vertices.len();
        if m < 2 {
            return Err(Error::InvalidRegion("a cone needs at least two vertices".into()));
        }
        let d = vertices[0].len();
        if d == 0 || vertices.iter().any(|v| v.len() != d) {
            return Err(Error::InvalidRegion("cone vertices must share a positive dimension".into()));
        }
        if index >= m {
            return Err(Error::InvalidRegion(format!("cone index {} outside 1..={m}", index + 1)));
        }
        let target = -1.0 / (m as f64 - 1.0);
        for (i, v) in vertices.iter().enumerate() {
            if (norm(v) - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidRegion(format!("cone vertex {} is not a unit vector", i + 1)));
            }
            for w in &vertices[i + 1..] {
                if (dot(v, w) - target).abs() > SIMPLEX_TOL {
                    return Err(Error::InvalidRegion("cone vertices are not a regular simplex centred at the origin".into()));
                }
            }
        }
        let apex = apex.unwrap_or_else(|| vec![0.0; d]);
        if apex.len() != d || apex.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRegion("cone apex must be a finite point of the same dimension".into()));
        }
        Ok(Self { vertices, index, apex })
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn apex(&self) -> &[f64] {
        &self.apex
    }

    pub fn m(&self) -> usize {
        self.vertices.len()
    }

    pub fn dim(&self) -> usize {
        self.apex.len()
    }

    pub fn apex_is_origin(&self) -> bool {
        self.apex.iter().all(|v| *v == 0.0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let rel: Vec<f64> = x.iter().zip(&self.apex).map(|(a, b)| a - b).collect();
        let own = dot(&rel, &self.vertices[self.index]);
        self.vertices.iter().all(|z| dot(&rel, z) <= own)
    }

    /// Halfspace description `{x : <x, n_j> <= c_j}` with unit normals.
    pub fn constraints(&self) -> Vec<(Vec<f64>, f64)> {
        let zi = &self.vertices[self.index];
        self.vertices
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.index)
            .map(|(_, zj)| {
                let diff: Vec<f64> = zj.iter().zip(zi).map(|(a, b)| a - b).collect();
                let l = norm(&diff);
                let n: Vec<f64> = diff.iter().map(|v| v / l).collect();
                let c = dot(&n, &self.apex);
                (n, c)
            })
            .collect()
    }

    /// Orthonormal basis of the plane spanned by three vertices.
    pub(crate) fn plane_basis(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.m() != 3 {
            return None;
        }
        let e1 = self.vertices[0].clone();
        let z = &self.vertices[1];
        let c = dot(z, &e1);
        let mut e2: Vec<f64> = z.iter().zip(&e1).map(|(a, b)| a - c * b).collect();
        let l = norm(&e2);
        e2.iter_mut().for_each(|v| *v /= l);
        Some((e1, e2))
    }

    fn reflect(&self) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v.iter().map(|x| -x).collect()).collect(),
            index: self.index,
            apex: self.apex.iter().map(|x| -x).collect(),
        }
    }

    fn translate(&self, v: &[f64]) -> Self {
        Self { vertices: self.vertices.clone(), index: self.index, apex: self.apex.iter().zip(v).map(|(a, b)| a + b).collect() }
    }
}

/// A union of grid cells, given by a membership flag per node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridIndicator {
    grid: Arc<QuadratureGrid>,
    member: Vec<bool>,
}

impl GridIndicator {
    pub fn new(grid: Arc<QuadratureGrid>, member: Vec<bool>) -> Result<Self> {
        if member.len() != grid.len() {
            return Err(Error::InvalidRegion(format!("{} membership flags for a grid of {} nodes", member.len(), grid.len())));
        }
        Ok(Self { grid, member })
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn member(&self) -> &[bool] {
        &self.member
    }

    /// Membership as 0/1 node values.
    pub fn values(&self) -> Vec<f64> {
        self.member.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.member[self.grid.locate(x)]
    }

    fn reflect(&self) -> Self {
        let member = (0..self.member.len()).map(|k| self.member[self.grid.mirror(k)]).collect();
        Self { grid: self.grid.clone(), member }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// `{y : <y, normal> <= offset}`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    SimplexCone(Cone),
    Grid(GridIndicator),
}

impl Region {
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.is_empty() || (norm(&normal) - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidRegion("halfspace normal must be a unit vector".into()));
        }
        if !offset.is_finite() {
            return Err(Error::InvalidRegion("halfspace offset must be finite".into()));
        }
        Ok(Region::Halfspace { normal, offset })
    }

    pub fn cone(vertices: Vec<Vec<f64>>, index: usize, apex: Option<Vec<f64>>) -> Result<Self> {
        Ok(Region::SimplexCone(Cone::new(vertices, index, apex)?))
    }

    pub fn grid(grid: Arc<QuadratureGrid>, member: Vec<bool>) -> Result<Self> {
        Ok(Region::Grid(GridIndicator::new(grid, member)?))
    }

    /// All of `R^d`, as a grid indicator with every node set.
    pub fn whole(grid: Arc<QuadratureGrid>) -> Self {
        let n = grid.len();
        Region::Grid(GridIndicator { grid, member: vec![true; n] })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Halfspace { normal, .. } => normal.len(),
            Region::SimplexCone(c) => c.dim(),
            Region::Grid(g) => g.grid.dim(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Halfspace { normal, offset } => dot(x, normal) <= *offset,
            Region::SimplexCone(c) => c.contains(x),
            Region::Grid(g) => g.contains(x),
        }
    }

    /// Halfspace constraints when the region is polyhedral.
    pub fn constraints(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match self {
            Region::Halfspace { normal, offset } => Some(vec![(normal.clone(), *offset)]),
            Region::SimplexCone(c) => Some(c.constraints()),
            Region::Grid(_) => None,
        }
    }

    /// The pointwise negation `-Omega`.
    pub fn reflect(&self) -> Self {
        match self {
            Region::Halfspace { normal, offset } => Region::Halfspace { normal: normal.iter().map(|v| -v).collect(), offset: *offset },
            Region::SimplexCone(c) => Region::SimplexCone(c.reflect()),
            Region::Grid(g) => Region::Grid(g.reflect()),
        }
    }

    /// `Omega + v`; grid regions are fixed to their grid and cannot move.
    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        match self {
            Region::Halfspace { normal, offset } => Ok(Region::Halfspace { normal: normal.clone(), offset: offset + dot(normal, v) }),
            Region::SimplexCone(c) => Ok(Region::SimplexCone(c.translate(v))),
            Region::Grid(_) => Err(Error::Unsupported("grid regions cannot be translated".into())),
        }
    }

    /// Two-vertex cones are halfspaces; everything else is returned unchanged.
    pub(crate) fn canonical(&self) -> Region {
        match self {
            Region::SimplexCone(c) if c.m() == 2 => {
                let (n, off) = c.constraints().remove(0);
                Region::Halfspace { normal: n, offset: off }
            }
            other => other.clone(),
        }
    }
}

/// `m` regions covering `R^d`, ties resolved by lowest index.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    dim: usize,
    sets: Vec<Region>,
    volume_targets: SimplexVector,
}

impl Partition {
    /// Allowed gap between a target and the estimated volume, on top of the
    /// estimate's own error.
    pub const VOLUME_TOL: f64 = 1e-2;

    pub fn new(dim: usize, sets: Vec<Region>, volume_targets: SimplexVector) -> Result<Self> {
        if volume_targets.len() != sets.len() {
            return Err(Error::InvalidPartition(format!("{} volume targets for {} sets", volume_targets.len(), sets.len())));
        }
        let p = Self::unchecked(dim, sets, volume_targets)?;
        for (i, (region, a)) in p.sets.iter().zip(p.volume_targets.entries()).enumerate() {
            let v = gaussian_volume(region)?;
            if (v.value - a).abs() > Self::VOLUME_TOL + v.error_estimate {
                return Err(Error::InvalidPartition(format!("set {} has Gaussian volume {:.6} but target {a}", i + 1, v.value)));
            }
        }
        Ok(p)
    }

    /// Builds a partition whose targets are the sets' own Gaussian volumes.
    pub fn from_regions(dim: usize, sets: Vec<Region>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidPartition("no sets".into()));
        }
        let mut vols = Vec::with_capacity(sets.len());
        for r in &sets {
            vols.push(gaussian_volume(r)?.value.max(0.0));
        }
        let total: f64 = vols.iter().sum();
        let targets = SimplexVector::new(vols.iter().map(|v| v / total).collect())?;
        Self::unchecked(dim, sets, targets)
    }

    fn unchecked(dim: usize, sets: Vec<Region>, volume_targets: SimplexVector) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidPartition("no sets".into()));
        }
        for r in &sets {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.dim() });
            }
        }
        let p = Self { dim, sets, volume_targets };
        p.check_cover()?;
        Ok(p)
    }

    fn check_cover(&self) -> Result<()> {
        if let Some(grid) = self.common_grid() {
            for k in 0..grid.len() {
                let count = self.sets.iter().filter(|r| matches!(r, Region::Grid(g) if g.member[k])).count();
                if count != 1 {
                    return Err(Error::InvalidPartition(format!("grid node {k} lies in {count} sets")));
                }
            }
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x = vec![0.0; self.dim];
        for _ in 0..1024 {
            for v in x.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = 1.5 * z;
            }
            let count = self.sets.iter().filter(|r| r.contains(&x)).count();
            if count != 1 {
                return Err(Error::InvalidPartition(format!("sample point {x:?} lies in {count} sets")));
            }
        }
        Ok(())
    }

    /// `{<y,u> <= c}` and its complement.
    pub fn halfspaces(dim: usize, normal: Vec<f64>, offset: f64) -> Result<Self> {
        let neg: Vec<f64> = normal.iter().map(|v| -v).collect();
        let sets = vec![Region::halfspace(normal, offset)?, Region::halfspace(neg, -offset)?];
        Self::from_regions(dim, sets)
    }

    /// The `m` simplex cones with apex at the origin.
    pub fn simplex_cones(dim: usize, m: usize) -> Result<Self> {
        Self::simplex_cones_at(dim, m, None)
    }

    pub fn simplex_cones_at(dim: usize, m: usize, apex: Option<Vec<f64>>) -> Result<Self> {
        let verts = simplex_vertices(m, dim)?;
        let sets = (0..m).map(|i| Region::cone(verts.clone(), i, apex.clone())).collect::<Result<Vec<_>>>()?;
        if apex.as_ref().is_none_or(|a| a.iter().all(|v| *v == 0.0)) {
            Self::unchecked(dim, sets, SimplexVector::uniform(m))
        } else {
            Self::from_regions(dim, sets)
        }
    }

    /// Grid partition with node `k` in set `labels[k]`.
    pub fn from_labels(grid: Arc<QuadratureGrid>, labels: &[usize], m: usize) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::InvalidPartition(format!("{} labels for a grid of {} nodes", labels.len(), grid.len())));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= m) {
            return Err(Error::InvalidPartition(format!("label {l} outside 0..{m}")));
        }
        let sets = (0..m)
            .map(|i| Region::grid(grid.clone(), labels.iter().map(|&l| l == i).collect()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_regions(grid.dim(), sets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn sets(&self) -> &[Region] {
        &self.sets
    }

    pub fn volume_targets(&self) -> &SimplexVector {
        &self.volume_targets
    }

    /// Index of the first set containing `x`.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        self.sets.iter().position(|r| r.contains(x))
    }

    /// The grid shared by every set, when all sets are grid indicators.
    pub fn common_grid(&self) -> Option<&Arc<QuadratureGrid>> {
        let mut found: Option<&Arc<QuadratureGrid>> = None;
        for r in &self.sets {
            match r {
                Region::Grid(g) => match found {
                    None => found = Some(&g.grid),
                    Some(f) if **f == *g.grid => {}
                    Some(_) => return None,
                },
                _ => return None,
            }
        }
        found
    }

    /// Node labels for grid partitions.
    pub fn labels(&self) -> Option<Vec<usize>> {
        let grid = self.common_grid()?;
        Some(
            (0..grid.len())
                .map(|k| self.sets.iter().position(|r| matches!(r, Region::Grid(g) if g.member[k])).unwrap_or(0))
                .collect(),
        )
    }

    pub fn reflect(&self) -> Self {
        Self { dim: self.dim, sets: self.sets.iter().map(Region::reflect).collect(), volume_targets: self.volume_targets.clone() }
    }

    /// Every set translated by `v`; volume targets follow the moved sets.
    pub fn translate(&self, v: &[f64]) -> Result<Self> {
        let sets = self.sets.iter().map(|r| r.translate(v)).collect::<Result<Vec<_>>>()?;
        Self::from_regions(self.dim, sets)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PartitionDoc::from(self)).expect("partition documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PartitionDoc = serde_json::from_str(text)?;
        doc.into_partition()
    }
}

/// Two partitions with matching dimension and set count.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPair {
    first: Partition,
    second: Partition,
}

impl PartitionPair {
    pub fn new(first: Partition, second: Partition) -> Result<Self> {
        if first.dim != second.dim {
            return Err(Error::DimensionMismatch { expected: first.dim, got: second.dim });
        }
        if first.m() != second.m() {
            return Err(Error::InvalidPartition(format!("paired partitions have {} and {} sets", first.m(), second.m())));
        }
        Ok(Self { first, second })
    }

    pub fn first(&self) -> &Partition {
        &self.first
    }

    pub fn second(&self) -> &Partition {
        &self.second
    }
}

pub const FORMAT_VERSION: u32 = 1;

fn default_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartitionDoc {
    #[serde(default = "default_version")]
    version: u32,
    dim: usize,
    m: usize,
    sets: Vec<RegionDoc>,
    #[serde(rename = "volumeTargets", default, skip_serializing_if = "Option::is_none")]
    volume_targets: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RegionDoc {
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    Cone {
        vertices: Vec<Vec<f64>>,
        /// One-based.
        index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        apex: Option<Vec<f64>>,
    },
    Grid {
        #[serde(rename = "nodesPerDim")]
        nodes_per_dim: usize,
        member: String,
    },
}

fn pack_bits(bits: &[bool]) -> String {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (k, &b) in bits.iter().enumerate() {
        if b {
            bytes[k / 8] |= 1 << (k % 8);
        }
    }
    B64.encode(bytes)
}

fn unpack_bits(text: &str, len: usize) -> Result<Vec<bool>> {
    let bytes = B64.decode(text).map_err(|e| Error::Serialization(format!("member bitset: {e}")))?;
    if bytes.len() != len.div_ceil(8) {
        return Err(Error::Serialization(format!("member bitset has {} bytes, expected {}", bytes.len(), len.div_ceil(8))));
    }
    Ok((0..len).map(|k| bytes[k / 8] & (1 << (k % 8)) != 0).collect())
}

impl From<&Partition> for PartitionDoc {
    fn from(p: &Partition) -> Self {
        let sets = p
            .sets
            .iter()
            .map(|r| match r {
                Region::Halfspace { normal, offset } => RegionDoc::Halfspace { normal: normal.clone(), offset: *offset },
                Region::SimplexCone(c) => RegionDoc::Cone {
                    vertices: c.vertices.clone(),
                    index: c.index + 1,
                    apex: if c.apex_is_origin() { None } else { Some(c.apex.clone()) },
                },
                Region::Grid(g) => RegionDoc::Grid { nodes_per_dim: g.grid.nodes_per_dim(), member: pack_bits(&g.member) },
            })
            .collect();
        PartitionDoc { version: FORMAT_VERSION, dim: p.dim, m: p.m(), sets, volume_targets: Some(p.volume_targets.entries().to_vec()) }
    }
}

impl PartitionDoc {
    fn into_partition(self) -> Result<Partition> {
        if self.version != FORMAT_VERSION {
            return Err(Error::Serialization(format!("unsupported partition format version {}", self.version)));
        }
        if self.m != self.sets.len() {
            return Err(Error::Serialization(format!("m = {} but {} sets given", self.m, self.sets.len())));
        }
        let mut grids: BTreeMap<usize, Arc<QuadratureGrid>> = BTreeMap::new();
        let mut sets = Vec::with_capacity(self.sets.len());
        for doc in self.sets {
            let region = match doc {
                RegionDoc::Halfspace { normal, offset } => Region::halfspace(normal, offset)?,
                RegionDoc::Cone { vertices, index, apex } => {
                    if index == 0 {
                        return Err(Error::InvalidRegion("cone index is one-based".into()));
                    }
                    Region::cone(vertices, index - 1, apex)?
                }
                RegionDoc::Grid { nodes_per_dim, member } => {
                    let grid = match grids.get(&nodes_per_dim) {
                        Some(g) => g.clone(),
                        None => {
                            let g = Arc::new(QuadratureGrid::new(self.dim, nodes_per_dim)?);
                            grids.insert(nodes_per_dim, g.clone());
                            g
                        }
                    };
                    let bits = unpack_bits(&member, grid.len())?;
                    Region::grid(grid, bits)?
                }
            };
            sets.push(region);
        }
        match self.volume_targets {
            Some(t) => Partition::new(self.dim, sets, SimplexVector::new(t)?),
            None => Partition::from_regions(self.dim, sets),
        }
    }
}
