//! Gaussian densities, the Mehler kernel, the Ornstein–Uhlenbeck operator and
//! noise stability of Gaussian partitions.

mod grid;
mod orthant;
mod region;
mod stability;

pub use grid::{interval_transition, GridOperator, QuadratureGrid, QUADRATURE_RHO_LIMIT};
pub use region::{simplex_vertices, Cone, GridIndicator, Partition, PartitionPair, Region};
pub use stability::{
    bilinear_noise_stability, bilinear_noise_stability_mc, gaussian_volume, noise_stability, noise_stability_mc,
    noise_stability_with, ou_apply, ou_gradient, reflect_partition, Estimate, Method, StabilityOptions,
    StabilityReport,
};

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A correlation strictly inside `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Correlation(f64);

impl Correlation {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho > -1.0 && rho < 1.0 {
            Ok(Self(rho))
        } else {
            Err(Error::InvalidCorrelation(rho))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `sqrt(1 - rho^2)`.
    pub fn complement(self) -> f64 {
        ((1.0 - self.0) * (1.0 + self.0)).sqrt()
    }

    /// Rejects zero, for operations that divide by `rho`.
    pub fn nonzero(self) -> Result<Self> {
        if self.0 == 0.0 {
            Err(Error::CorrelationNotAllowed { rho: 0.0, reason: "operation divides by rho" })
        } else {
            Ok(self)
        }
    }

    pub fn negate(self) -> Self {
        Self(-self.0)
    }
}

impl<'de> Deserialize<'de> for Correlation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Correlation::new(v).map_err(serde::de::Error::custom)
    }
}

/// A point of the probability simplex `Delta_m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidSimplex("empty vector".into()));
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidSimplex(format!("entry {v} is negative or not finite")));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidSimplex(format!("entries sum to {sum}")));
        }
        Ok(Self(entries))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    /// The standard basis vector `e_j` (zero-based `j`).
    pub fn basis(m: usize, j: usize) -> Self {
        let mut v = vec![0.0; m];
        v[j] = 1.0;
        Self(v)
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for SimplexVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        SimplexVector::new(v).map_err(serde::de::Error::custom)
    }
}

/// Standard Gaussian density `(2 pi)^{-k/2} exp(-|x|^2 / 2)` on `R^k`.
pub fn gaussian_density(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (-0.5 * r2 - 0.5 * x.len() as f64 * (2.0 * PI).ln()).exp()
}

/// The Mehler kernel `G(x, y)`, the joint density of a `rho`-correlated pair.
pub fn mehler_kernel(x: &[f64], y: &[f64], rho: Correlation) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let r = rho.value();
    let one_m = (1.0 - r) * (1.0 + r);
    let d = x.len() as f64;
    let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        xx += a * a;
        yy += b * b;
        xy += a * b;
    }
    let expo = (-xx - yy + 2.0 * r * xy) / (2.0 * one_m);
    Ok((expo - 0.5 * d * one_m.ln() - d * (2.0 * PI).ln()).exp())
}

/// Smallest eigenvalue of the Gram matrix `[G(z_a, z_b)]` of the Mehler kernel.
pub fn mehler_min_eigenvalue(points: &[Vec<f64>], rho: Correlation) -> Result<f64> {
    let k = points.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no points".into()));
    }
    let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let g = mehler_kernel(&points[a], &points[b], rho)?;
            gram[(a, b)] = g;
            gram[(b, a)] = g;
        }
    }
    Ok(nalgebra::SymmetricEigen::new(gram).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `P(X <= a, Y <= b)` for standard normals with correlation `rho`.
pub fn bivariate_orthant(a: f64, b: f64, rho: Correlation) -> Result<f64> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::InvalidArgument("orthant limits must not be NaN".into()));
    }
    Ok(orthant::orthant(a, b, rho.value()))
}

/// Draws `rho`-correlated standard Gaussian pairs in `R^d`.
#[derive(Debug, Clone)]
pub struct CorrelatedSampler {
    rng: ChaCha8Rng,
    rho: f64,
    s: f64,
}

impl CorrelatedSampler {
    pub fn new(rho: Correlation, seed: u64) -> Self {
        Self::from_rng(rho, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_rng(rho: Correlation, rng: ChaCha8Rng) -> Self {
        Self { rng, rho: rho.value(), s: rho.complement() }
    }

    /// Fills `x` and `y` with a fresh pair; `Y = rho X + sqrt(1 - rho^2) Z`.
    pub fn fill(&mut self, x: &mut [f64], y: &mut [f64]) {
        for (a, b) in x.iter_mut().zip(y.iter_mut()) {
            let u: f64 = StandardNormal.sample(&mut self.rng);
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *a = u;
            *b = self.rho * u + self.s * z;
        }
    }
}

/// One `rho`-correlated pair `(X, Y)` in `R^d`, deterministic in `seed`.
pub fn sample_correlated_pair(rho: Correlation, d: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut sampler = CorrelatedSampler::new(rho, seed);
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    sampler.fill(&mut x, &mut y);
    (x, y)
}

/// `(2/pi) arccos(rho) / (1 - rho)`.
pub fn gw_objective(rho: f64) -> f64 {
    2.0 / PI * rho.acos() / (1.0 - rho)
}

/// Minimizer of [`gw_objective`] over `[-1, 1)`.
pub fn gw_argmin() -> f64 {
    // The objective is unimodal on [-1, 0.5]; golden-section search.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-1.0f64, 0.5f64);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (gw_objective(c), gw_objective(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = gw_objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = gw_objective(d);
        }
    }
    0.5 * (a + b)
}

/// The Goemans–Williamson constant `min_{rho} (2/pi) arccos(rho)/(1-rho)`.
pub fn gw_constant() -> f64 {
    gw_objective(gw_argmin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_bounds() {
        assert!(Correlation::new(1.0).is_err());
        assert!(Correlation::new(-1.0).is_err());
        assert!(Correlation::new(f64::NAN).is_err());
        assert!(Correlation::new(0.0).unwrap().nonzero().is_err());
        assert!((Correlation::new(0.6).unwrap().complement() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn simplex_vector_validation() {
        assert!(SimplexVector::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexVector::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexVector::new(vec![1.5, -0.5]).is_err());
        assert_eq!(SimplexVector::basis(3, 1).entries(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn density_values() {
        assert!((gaussian_density(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert!((gaussian_density(&[0.0, 0.0]) - 1.0 / (2.0 * PI)).abs() < 1e-16);
        assert!((gaussian_density(&[1.0]) - 0.241_970_724_519_143_35).abs() < 1e-16);
    }

    #[test]
    fn mehler_values() {
        let r = Correlation::new(0.5).unwrap();
        assert!((mehler_kernel(&[0.0], &[0.0], r).unwrap() - 0.183_776_298_473_93).abs() < 1e-13);
        let x = [0.3, -1.1];
        let y = [1.4, 0.2];
        assert_eq!(mehler_kernel(&x, &y, r).unwrap(), mehler_kernel(&y, &x, r).unwrap());
        let z = Correlation::new(0.0).unwrap();
        let prod = gaussian_density(&x) * gaussian_density(&y);
        assert!((mehler_kernel(&x, &y, z).unwrap() - prod).abs() < 1e-16);
        assert!(mehler_kernel(&x, &[0.0], r).is_err());
    }

    #[test]
    fn mehler_gram_is_psd_for_nonnegative_rho() {
        let pts: Vec<Vec<f64>> = (0..20).map(|k| vec![(k as f64 * 0.37).sin() * 2.0, (k as f64 * 0.91).cos()]).collect();
        assert!(mehler_min_eigenvalue(&pts, Correlation::new(0.7).unwrap()).unwrap() >= -1e-12);
        // Odd Hermite modes make the kernel indefinite for negative rho.
        let pair = vec![vec![1.0], vec![-1.0]];
        assert!(mehler_min_eigenvalue(&pair, Correlation::new(-0.5).unwrap()).unwrap() < 0.0);
    }

    #[test]
    fn gw_values() {
        assert!((gw_constant() - 0.878_567_205_784_851_6).abs() < 1e-10);
        assert!((gw_argmin() + 0.689_157_736_6).abs() < 1e-6);
        assert!((gw_objective(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampler_is_deterministic() {
        let r = Correlation::new(0.4).unwrap();
        assert_eq!(sample_correlated_pair(r, 3, 11), sample_correlated_pair(r, 3, 11));
        assert_ne!(sample_correlated_pair(r, 3, 11), sample_correlated_pair(r, 3, 12));
    }
}
