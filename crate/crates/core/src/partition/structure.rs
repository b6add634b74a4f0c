//! Effective dimension of interfaces and ray directions of planar partitions.

use super::mesh::{normal_samples, InterfaceMesh};
use crate::error::{Error, Result};
use crate::gaussian::Partition;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

/// Eigenvalues above this fraction of the trace count towards the effective dimension.
pub const EFFECTIVE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DimensionReport {
    /// Eigenvalues of `sum w N N^T`, descending.
    pub eigenvalues: Vec<f64>,
    /// Matching unit eigenvectors; rotating onto them aligns the product structure with the axes.
    pub axes: Vec<Vec<f64>>,
    pub trace: f64,
    pub effective_dimension: usize,
    pub samples: usize,
}

/// Second-moment analysis of the Gaussian-weighted interface normals.
pub fn dimension_reduction_check(p: &Partition) -> Result<DimensionReport> {
    let samples = normal_samples(p)?;
    if samples.is_empty() {
        return Err(Error::DegenerateMesh("partition has no interfaces".into()));
    }
    let d = p.dim();
    let mut mom = DMatrix::<f64>::zeros(d, d);
    for s in &samples {
        for a in 0..d {
            for b in 0..d {
                mom[(a, b)] += s.weight * s.normal[a] * s.normal[b];
            }
        }
    }
    let trace = mom.trace();
    if trace <= 0.0 {
        return Err(Error::DegenerateMesh("interfaces carry no Gaussian weight".into()));
    }
    let eig = SymmetricEigen::new(mom);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let axes = order.iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect();
    let effective_dimension = eigenvalues.iter().filter(|&&l| l > EFFECTIVE_FRACTION * trace).count();
    Ok(DimensionReport { eigenvalues, axes, trace, effective_dimension, samples: samples.len() })
}

/// Mean directions of planar interfaces seen from their common centroid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RayReport {
    /// Gaussian-weighted centroid of all interface points.
    pub centroid: Vec<f64>,
    /// `(pair, unit direction, angle in degrees)`, sorted by angle.
    pub rays: Vec<((usize, usize), Vec<f64>, f64)>,
}

impl RayReport {
    /// Angular gaps between consecutive rays, in degrees, summing to 360.
    pub fn separations(&self) -> Vec<f64> {
        let k = self.rays.len();
        (0..k)
            .map(|a| {
                let next = if a + 1 < k { self.rays[a + 1].2 } else { self.rays[0].2 + 360.0 };
                next - self.rays[a].2
            })
            .collect()
    }
}

/// For each interface, the normalized weighted mean of `x - c` over its
/// points, where `c` is the weighted centroid of all interfaces.
pub fn ray_directions(meshes: &[InterfaceMesh]) -> Result<RayReport> {
    let mut c = [0.0; 2];
    let mut wsum = 0.0;
    for m in meshes {
        for e in &m.elements {
            if e.point.len() != 2 {
                return Err(Error::Unsupported("ray directions are defined for planar partitions".into()));
            }
            c[0] += e.weight * e.point[0];
            c[1] += e.weight * e.point[1];
            wsum += e.weight;
        }
    }
    if wsum <= 0.0 {
        return Err(Error::DegenerateMesh("no interface weight".into()));
    }
    c[0] /= wsum;
    c[1] /= wsum;
    let mut rays = Vec::new();
    for m in meshes {
        let mut v = [0.0; 2];
        for e in &m.elements {
            v[0] += e.weight * (e.point[0] - c[0]);
            v[1] += e.weight * (e.point[1] - c[1]);
        }
        let l = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if l > 0.0 {
            let dir = vec![v[0] / l, v[1] / l];
            let ang = dir[1].atan2(dir[0]).to_degrees().rem_euclid(360.0);
            rays.push((m.pair, dir, ang));
        }
    }
    rays.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal));
    Ok(RayReport { centroid: c.to_vec(), rays })
}
