//! Numerical checks of the first and second variation identities on
//! interface meshes.

use super::mesh::{extract_interfaces, InterfaceMesh};
use crate::error::{Error, Result};
use crate::gaussian::{noise_stability, ou_apply, ou_gradient, Correlation, Partition, Region};
use crate::par::map_indexed;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use std::f64::consts::PI;

/// Singular values below this count as zero in [`volume_constraint_matrix`].
pub const NULL_TOL: f64 = 1e-8;
/// Largest `|M v|` accepted for `v` in the volume-preserving subspace.
pub const IN_SUBSPACE_TOL: f64 = 1e-6;
/// Cap on evaluation points per pair for the boundary-integral check.
const MAX_EVAL_POINTS: usize = 2000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `T_rho(1_{Omega_i} - 1_{Omega_j})(x)` and its gradient.
pub fn ou_difference(p: &Partition, i: usize, j: usize, x: &[f64], rho: Correlation) -> Result<(f64, Vec<f64>)> {
    match (&p.sets()[i], &p.sets()[j]) {
        (Region::Grid(a), Region::Grid(b)) if a.grid() == b.grid() => {
            let h: Vec<f64> = a.member().iter().zip(b.member()).map(|(u, v)| f64::from(u8::from(*u)) - f64::from(u8::from(*v))).collect();
            Ok(a.grid().ou_pointwise(&h, x, rho.value()))
        }
        (a, b) => {
            let value = ou_apply(a, x, rho)? - ou_apply(b, x, rho)?;
            let grad = ou_gradient(a, x, rho)?.iter().zip(ou_gradient(b, x, rho)?).map(|(u, v)| u - v).collect();
            Ok((value, grad))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PairVariation {
    /// One-based in serialized output.
    #[serde(serialize_with = "one_based")]
    pub pair: (usize, usize),
    pub points: usize,
    /// Gaussian-weighted mean of `T_rho(1_i - 1_j)` on the interface, `c_ij`.
    pub mean: f64,
    /// Weighted rms of `T_rho(1_i - 1_j) - c_ij`.
    pub rms_deviation: f64,
    pub max_deviation: f64,
    /// Weighted rms of `T_rho(1_i - 1_j)` itself, its deviation from zero.
    pub rms_value: f64,
    pub gradient_norm_min: f64,
    pub gradient_norm_mean: f64,
    pub gradient_norm_max: f64,
    /// Fraction of points with `<grad T_rho(1_i - 1_j), N_ij> <= 0`.
    pub normal_sign_fraction: f64,
}

fn one_based<S: serde::Serializer>(pair: &(usize, usize), s: S) -> std::result::Result<S::Ok, S::Error> {
    [pair.0 + 1, pair.1 + 1].serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VariationReport {
    pub rho: f64,
    pub pairs: Vec<PairVariation>,
    /// Pairs without a shared interface.
    pub skipped: Vec<String>,
}

impl VariationReport {
    pub fn max_rms_deviation(&self) -> f64 {
        self.pairs.iter().map(|p| p.rms_deviation).fold(0.0, f64::max)
    }

    pub fn max_rms_value(&self) -> f64 {
        self.pairs.iter().map(|p| p.rms_value).fold(0.0, f64::max)
    }

    pub fn min_normal_sign_fraction(&self) -> f64 {
        self.pairs.iter().map(|p| p.normal_sign_fraction).fold(1.0, f64::min)
    }
}

fn skipped_pairs(m: usize, meshes: &[InterfaceMesh]) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if !meshes.iter().any(|mesh| mesh.pair == (i, j)) {
                out.push(format!("sets {} and {} share no interface", i + 1, j + 1));
            }
        }
    }
    out
}

/// Evaluates `T_rho(1_i - 1_j)` along every interface and reports how far it
/// is from constant.
pub fn first_variation_check(p: &Partition, rho: Correlation) -> Result<VariationReport> {
    let meshes = extract_interfaces(p)?;
    let mut pairs = Vec::new();
    for mesh in &meshes {
        let (i, j) = mesh.pair;
        let evals = map_indexed(mesh.elements.len(), |k| ou_difference(p, i, j, &mesh.elements[k].point, rho));
        let evals = evals.into_iter().collect::<Result<Vec<_>>>()?;
        let wsum: f64 = mesh.elements.iter().map(|e| e.weight).sum();
        if wsum <= 0.0 {
            return Err(Error::DegenerateMesh(format!("interface {}-{} has no Gaussian weight", i + 1, j + 1)));
        }
        let mean = mesh.elements.iter().zip(&evals).map(|(e, (t, _))| e.weight * t).sum::<f64>() / wsum;
        let mut dev2 = 0.0;
        let mut val2 = 0.0;
        let mut max_dev = 0.0f64;
        let (mut gmin, mut gmax, mut gsum) = (f64::INFINITY, 0.0f64, 0.0);
        let mut good = 0usize;
        for (e, (t, g)) in mesh.elements.iter().zip(&evals) {
            dev2 += e.weight * (t - mean).powi(2);
            val2 += e.weight * t * t;
            max_dev = max_dev.max((t - mean).abs());
            let gn = dot(g, g).sqrt();
            gmin = gmin.min(gn);
            gmax = gmax.max(gn);
            gsum += e.weight * gn;
            if dot(g, &e.normal) <= 0.0 {
                good += 1;
            }
        }
        pairs.push(PairVariation {
            pair: mesh.pair,
            points: mesh.elements.len(),
            mean,
            rms_deviation: (dev2 / wsum).sqrt(),
            max_deviation: max_dev,
            rms_value: (val2 / wsum).sqrt(),
            gradient_norm_min: gmin,
            gradient_norm_mean: gsum / wsum,
            gradient_norm_max: gmax,
            normal_sign_fraction: good as f64 / mesh.elements.len() as f64,
        });
    }
    Ok(VariationReport { rho: rho.value(), pairs, skipped: skipped_pairs(p.m(), &meshes) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EigenResidual {
    #[serde(serialize_with = "one_based")]
    pub pair: (usize, usize),
    pub points: usize,
    pub max_abs: f64,
    pub rms_abs: f64,
    /// Largest relative residual over points where the right side exceeds
    /// `1e-3` of its maximum over all interfaces.
    pub max_rel: f64,
    /// `sqrt(sum w r^2 / sum w rhs^2)`.
    pub rms_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EigenReport {
    pub rho: f64,
    pub direction: Vec<f64>,
    pub pairs: Vec<EigenResidual>,
    pub max_abs: f64,
    pub rms_abs: f64,
    pub max_rel: f64,
    pub rms_rel: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Compares the boundary integral
/// `S_ij(x) = c (int_{dOmega_i} - int_{dOmega_j}) <v, N(y)> exp(-|y - rho x|^2 / (2(1 - rho^2))) dy`,
/// `c = ((1 - rho^2) 2 pi)^{-d/2}`, with `(1/rho) <v, N_ij(x)> |grad T_rho(1_i - 1_j)(x)|`
/// at interface points `x`.
pub fn almost_eigenfunction_check(p: &Partition, rho: Correlation, v: &[f64]) -> Result<EigenReport> {
    let rho = rho.nonzero()?;
    if v.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: v.len() });
    }
    let meshes = extract_interfaces(p)?;
    if meshes.is_empty() {
        return Err(Error::DegenerateMesh("partition has no interfaces".into()));
    }
    let r = rho.value();
    let s2 = (1.0 - r) * (1.0 + r);
    let d = p.dim() as f64;
    let c = (2.0 * PI * s2).powf(-0.5 * d);
    // Flux sources: every element contributes to both adjacent sets.
    let sources: Vec<(&[f64], f64, usize, usize)> = meshes
        .iter()
        .flat_map(|m| m.elements.iter().map(move |e| (e.point.as_slice(), e.length * dot(v, &e.normal), m.pair.0, m.pair.1)))
        .filter(|s| s.1 != 0.0)
        .collect();
    let mut all_rows = Vec::with_capacity(meshes.len());
    for mesh in &meshes {
        let (i, j) = mesh.pair;
        let stride = mesh.elements.len().div_ceil(MAX_EVAL_POINTS).max(1);
        let chosen: Vec<usize> = (0..mesh.elements.len()).step_by(stride).collect();
        let rows = map_indexed(chosen.len(), |q| -> Result<(f64, f64, f64)> {
            let e = &mesh.elements[chosen[q]];
            let x = &e.point;
            let mut s = 0.0;
            for (y, flux, a, b) in &sources {
                let coef = f64::from(u8::from(*a == i)) - f64::from(u8::from(*b == i)) - f64::from(u8::from(*a == j))
                    + f64::from(u8::from(*b == j));
                if coef != 0.0 {
                    let dist2: f64 = y.iter().zip(x).map(|(yy, xx)| (yy - r * xx).powi(2)).sum();
                    s += coef * flux * (-dist2 / (2.0 * s2)).exp();
                }
            }
            let (_, g) = ou_difference(p, i, j, x, rho)?;
            let rhs = dot(v, &e.normal) * dot(&g, &g).sqrt() / r;
            Ok((c * s, rhs, e.weight))
        });
        all_rows.push(rows.into_iter().collect::<Result<Vec<_>>>()?);
    }
    let peak = all_rows.iter().flatten().map(|(_, rhs, _)| rhs.abs()).fold(0.0, f64::max);
    let mut pairs = Vec::new();
    let (mut tot_r2, mut tot_rhs2, mut tot_w) = (0.0, 0.0, 0.0);
    for (mesh, rows) in meshes.iter().zip(&all_rows) {
        let (mut max_abs, mut max_rel, mut r2, mut rhs2, mut wsum) = (0.0f64, 0.0f64, 0.0, 0.0, 0.0);
        for (s, rhs, w) in rows {
            let res = (s - rhs).abs();
            max_abs = max_abs.max(res);
            if peak > 0.0 && rhs.abs() >= 1e-3 * peak {
                max_rel = max_rel.max(res / rhs.abs());
            }
            r2 += w * res * res;
            rhs2 += w * rhs * rhs;
            wsum += w;
        }
        tot_r2 += r2;
        tot_rhs2 += rhs2;
        tot_w += wsum;
        pairs.push(EigenResidual {
            pair: mesh.pair,
            points: rows.len(),
            max_abs,
            rms_abs: if wsum > 0.0 { (r2 / wsum).sqrt() } else { 0.0 },
            max_rel,
            rms_rel: ratio(r2, rhs2),
        });
    }
    Ok(EigenReport {
        rho: r,
        direction: v.to_vec(),
        max_abs: pairs.iter().map(|q| q.max_abs).fold(0.0, f64::max),
        max_rel: pairs.iter().map(|q| q.max_rel).fold(0.0, f64::max),
        rms_abs: if tot_w > 0.0 { (tot_r2 / tot_w).sqrt() } else { 0.0 },
        rms_rel: ratio(tot_r2, tot_rhs2),
        pairs,
    })
}

/// The matrix `(M v)_i = sum_{j != i} int_{Sigma_ij} <v, N_ij> dgamma` and
/// an orthonormal basis of its null space `V`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VolumeConstraint {
    /// `m` rows of length `d`.
    pub matrix: Vec<Vec<f64>>,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub null_space: Vec<Vec<f64>>,
}

impl VolumeConstraint {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.iter().map(|row| dot(row, v)).collect()
    }
}

pub fn volume_constraint_matrix(p: &Partition) -> Result<VolumeConstraint> {
    let meshes = extract_interfaces(p)?;
    volume_constraint_from(p.m(), p.dim(), &meshes)
}

pub(crate) fn volume_constraint_from(m: usize, d: usize, meshes: &[InterfaceMesh]) -> Result<VolumeConstraint> {
    let mut rows = vec![vec![0.0; d]; m];
    for mesh in meshes {
        let (i, j) = mesh.pair;
        for e in &mesh.elements {
            for (t, nt) in e.normal.iter().enumerate() {
                rows[i][t] += e.weight * nt;
                rows[j][t] -= e.weight * nt;
            }
        }
    }
    let mt = DMatrix::from_fn(m, d, |a, b| rows[a][b]);
    let eig = SymmetricEigen::new(mt.transpose() * &mt);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let singular_values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0).sqrt()).collect();
    let null_space = order
        .iter()
        .zip(&singular_values)
        .filter(|(_, s)| **s < NULL_TOL)
        .map(|(&k, _)| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    Ok(VolumeConstraint { matrix: rows, singular_values, null_space })
}

fn check_positive(rho: Correlation) -> Result<f64> {
    let r = rho.value();
    if r <= 0.0 {
        return Err(Error::CorrelationNotAllowed { rho: r, reason: "the second variation formula needs 0 < rho < 1" });
    }
    Ok(r)
}

/// `(1/rho - 1) sum_{i<j} int_{Sigma_ij} |grad T_rho(1_i - 1_j)| <v, N_ij>^2 dgamma`
/// for `v` in the volume-preserving subspace.
pub fn translation_second_variation(p: &Partition, rho: Correlation, v: &[f64]) -> Result<f64> {
    let meshes = extract_interfaces(p)?;
    let vc = volume_constraint_from(p.m(), p.dim(), &meshes)?;
    if v.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: v.len() });
    }
    let mv = vc.apply(v);
    let norm = dot(&mv, &mv).sqrt();
    if norm > IN_SUBSPACE_TOL {
        return Err(Error::InvalidArgument(format!("direction does not preserve volumes: |Mv| = {norm:.3e}")));
    }
    second_variation_on(p, rho, v, &meshes)
}

/// The same boundary formula without requiring `v` to preserve volumes.
pub fn translation_second_variation_unconstrained(p: &Partition, rho: Correlation, v: &[f64]) -> Result<f64> {
    if v.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: v.len() });
    }
    let meshes = extract_interfaces(p)?;
    second_variation_on(p, rho, v, &meshes)
}

fn second_variation_on(p: &Partition, rho: Correlation, v: &[f64], meshes: &[InterfaceMesh]) -> Result<f64> {
    let r = check_positive(rho)?;
    let mut total = 0.0;
    for mesh in meshes {
        let (i, j) = mesh.pair;
        let terms = map_indexed(mesh.elements.len(), |k| -> Result<f64> {
            let e = &mesh.elements[k];
            let vn = dot(v, &e.normal);
            if vn == 0.0 || e.weight == 0.0 {
                return Ok(0.0);
            }
            let (_, g) = ou_difference(p, i, j, &e.point, rho)?;
            Ok(e.weight * dot(&g, &g).sqrt() * vn * vn)
        });
        for t in terms {
            total += t?;
        }
    }
    Ok((1.0 / r - 1.0) * total)
}

/// Half second differences of `s -> S(Omega + s v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SecondDifference {
    pub step: f64,
    /// `(S(h) - 2 S(0) + S(-h)) / (2 h^2)`.
    pub coarse: f64,
    /// The same with step `h / 2`.
    pub fine: f64,
    /// `(4 fine - coarse) / 3`.
    pub richardson: f64,
}

/// Finite-difference estimate of `(1/2) d^2/ds^2 S(Omega + s v)` at `s = 0`.
pub fn translation_second_difference(p: &Partition, rho: Correlation, v: &[f64], step: f64) -> Result<SecondDifference> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let at = |s: f64| -> Result<f64> {
        let shift: Vec<f64> = v.iter().map(|x| s * x).collect();
        Ok(noise_stability(&p.translate(&shift)?, rho)?.value)
    };
    let s0 = at(0.0)?;
    let diff = |h: f64| -> Result<f64> { Ok((at(h)? - 2.0 * s0 + at(-h)?) / (2.0 * h * h)) };
    let coarse = diff(step)?;
    let fine = diff(0.5 * step)?;
    Ok(SecondDifference { step, coarse, fine, richardson: (4.0 * fine - coarse) / 3.0 })
}
