//! Ornstein–Uhlenbeck evaluation, Gaussian volumes and noise stability.

use super::grid::{GridOperator, QuadratureGrid, QUADRATURE_RHO_LIMIT};
use super::orthant::{orthant, orthant_da};
use super::region::{Cone, Partition, PartitionPair, Region};
use super::{CorrelatedSampler, Correlation};
use crate::error::{Error, Result};
use crate::mc;
use crate::special::{gauss_legendre, norm_cdf, norm_pdf};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte-carlo",
        })
    }
}

/// A computed quantity with its method and error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub method: Method,
    #[serde(rename = "errorEstimate")]
    pub error_estimate: f64,
    #[serde(rename = "samplesOrNodes")]
    pub samples_or_nodes: u64,
}

pub type StabilityReport = Estimate;

/// Accuracy target of the bivariate orthant routine.
const CLOSED_FORM_ERR: f64 = 1e-10;

impl Estimate {
    fn closed(value: f64) -> Self {
        Self { value, method: Method::ClosedForm, error_estimate: CLOSED_FORM_ERR, samples_or_nodes: 0 }
    }

    fn combine(parts: &[Estimate]) -> Self {
        Self {
            value: parts.iter().map(|e| e.value).sum(),
            method: parts.iter().map(|e| e.method).max().unwrap_or(Method::ClosedForm),
            error_estimate: parts.iter().map(|e| e.error_estimate).sum(),
            samples_or_nodes: parts.iter().map(|e| e.samples_or_nodes).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    /// Sample count used when no deterministic path applies.
    pub mc_samples: u64,
    pub seed: u64,
    pub force_monte_carlo: bool,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { mc_samples: 1_000_000, seed: 0, force_monte_carlo: false }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(region: &Region, x: &[f64]) -> Result<()> {
    if region.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: region.dim(), got: x.len() });
    }
    Ok(())
}

/// `T_rho 1_C (x)` for `C = {<y, n_j> <= c_j}` with one or two constraints.
fn polyhedral_value(cons: &[(Vec<f64>, f64)], x: &[f64], rho: f64, s: f64) -> Option<f64> {
    match cons {
        [(n, c)] => Some(norm_cdf((c - rho * dot(x, n)) / s)),
        [(n1, c1), (n2, c2)] => {
            let t1 = (c1 - rho * dot(x, n1)) / s;
            let t2 = (c2 - rho * dot(x, n2)) / s;
            Some(orthant(t1, t2, dot(n1, n2)))
        }
        _ => None,
    }
}

fn polyhedral_gradient(cons: &[(Vec<f64>, f64)], x: &[f64], rho: f64, s: f64) -> Option<Vec<f64>> {
    let scale = -rho / s;
    match cons {
        [(n, c)] => {
            let g = norm_pdf((c - rho * dot(x, n)) / s) * scale;
            Some(n.iter().map(|v| g * v).collect())
        }
        [(n1, c1), (n2, c2)] => {
            let t1 = (c1 - rho * dot(x, n1)) / s;
            let t2 = (c2 - rho * dot(x, n2)) / s;
            let r = dot(n1, n2);
            let g1 = orthant_da(t1, t2, r) * scale;
            let g2 = orthant_da(t2, t1, r) * scale;
            Some(n1.iter().zip(n2).map(|(a, b)| g1 * a + g2 * b).collect())
        }
        _ => None,
    }
}

/// `T_rho 1_Omega (x) = P(rho x + sqrt(1 - rho^2) Z in Omega)`.
pub fn ou_apply(region: &Region, x: &[f64], rho: Correlation) -> Result<f64> {
    check_dim(region, x)?;
    let (r, s) = (rho.value(), rho.complement());
    match region {
        Region::Grid(g) => Ok(g.grid().ou_pointwise(&g.values(), x, r).0),
        other => {
            let cons = other.constraints().unwrap_or_default();
            polyhedral_value(&cons, x, r, s)
                .ok_or_else(|| Error::Unsupported("closed-form T_rho for cones with more than three vertices".into()))
        }
    }
}

/// Gradient of `T_rho 1_Omega` at `x`, by differentiation under the integral.
pub fn ou_gradient(region: &Region, x: &[f64], rho: Correlation) -> Result<Vec<f64>> {
    check_dim(region, x)?;
    let (r, s) = (rho.value(), rho.complement());
    match region {
        Region::Grid(g) => Ok(g.grid().ou_pointwise(&g.values(), x, r).1),
        other => {
            let cons = other.constraints().unwrap_or_default();
            polyhedral_gradient(&cons, x, r, s)
                .ok_or_else(|| Error::Unsupported("closed-form gradient for cones with more than three vertices".into()))
        }
    }
}

/// Gaussian measure of a region.
pub fn gaussian_volume(region: &Region) -> Result<Estimate> {
    match region.canonical() {
        Region::Halfspace { offset, .. } => Ok(Estimate::closed(norm_cdf(offset))),
        Region::SimplexCone(c) => {
            if c.apex_is_origin() {
                return Ok(Estimate { value: 1.0 / c.m() as f64, method: Method::ClosedForm, error_estimate: 0.0, samples_or_nodes: 0 });
            }
            let origin = vec![0.0; c.dim()];
            match polyhedral_value(&c.constraints(), &origin, 0.0, 1.0) {
                Some(v) => Ok(Estimate::closed(v)),
                None => {
                    let region = Region::SimplexCone(c.clone());
                    let d = c.dim();
                    let e = mc::estimate(1_000_000, 0, |rng, out| {
                        let mut sampler = CorrelatedSampler::from_rng(Correlation(0.0), rng.clone());
                        let mut x = vec![0.0; d];
                        let mut y = vec![0.0; d];
                        for v in out.iter_mut() {
                            sampler.fill(&mut x, &mut y);
                            *v = if region.contains(&x) { 1.0 } else { 0.0 };
                        }
                    });
                    Ok(Estimate { value: e.mean, method: Method::MonteCarlo, error_estimate: e.err, samples_or_nodes: e.samples })
                }
            }
        }
        Region::Grid(g) => {
            let v = g.grid().integrate(&g.values());
            Ok(Estimate {
                value: v,
                method: Method::Quadrature,
                error_estimate: f64::EPSILON * g.grid().len() as f64,
                samples_or_nodes: g.grid().len() as u64,
            })
        }
    }
}

pub fn reflect_partition(p: &Partition) -> Partition {
    p.reflect()
}

/// `sum_i int 1_{Omega_i} T_rho 1_{Omega_i} dgamma`.
pub fn noise_stability(p: &Partition, rho: Correlation) -> Result<StabilityReport> {
    noise_stability_with(p, rho, &StabilityOptions::default())
}

pub fn noise_stability_with(p: &Partition, rho: Correlation, opts: &StabilityOptions) -> Result<StabilityReport> {
    if opts.force_monte_carlo {
        return noise_stability_mc(p, rho, opts.mc_samples, opts.seed);
    }
    if rho.value() < 0.0 {
        // int h T_rho h = int h(x) T_{-rho} h(-x): pair each set with its reflection.
        let reflected = p.reflect();
        return bilinear_core(p, &reflected, rho.negate(), opts);
    }
    bilinear_core(p, p, rho, opts)
}

/// `sum_i int 1_{Omega_i} T_rho 1_{Omega_i'} dgamma` for `0 <= rho < 1`.
pub fn bilinear_noise_stability(pair: &PartitionPair, rho: Correlation) -> Result<StabilityReport> {
    if rho.value() < 0.0 {
        return Err(Error::CorrelationNotAllowed { rho: rho.value(), reason: "the bilinear form is evaluated for 0 <= rho < 1" });
    }
    bilinear_core(pair.first(), pair.second(), rho, &StabilityOptions::default())
}

fn bilinear_core(a: &Partition, b: &Partition, rho: Correlation, opts: &StabilityOptions) -> Result<Estimate> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if a.m() != b.m() {
        return Err(Error::InvalidPartition(format!("paired partitions have {} and {} sets", a.m(), b.m())));
    }
    let r = rho.value();
    if r == 0.0 {
        let mut parts = Vec::with_capacity(a.m());
        for (x, y) in a.sets().iter().zip(b.sets()) {
            let (vx, vy) = (gaussian_volume(x)?, gaussian_volume(y)?);
            parts.push(Estimate {
                value: vx.value * vy.value,
                method: vx.method.max(vy.method),
                error_estimate: vx.error_estimate + vy.error_estimate,
                samples_or_nodes: vx.samples_or_nodes.max(vy.samples_or_nodes),
            });
        }
        return Ok(Estimate::combine(&parts));
    }
    if let (Some(ga), Some(gb)) = (a.common_grid(), b.common_grid()) {
        if ga == gb {
            return grid_bilinear(ga, a, b, rho);
        }
    }
    let mut parts = Vec::with_capacity(a.m());
    for (x, y) in a.sets().iter().zip(b.sets()) {
        match pair_mass(&x.canonical(), &y.canonical(), r)? {
            Some(e) => parts.push(e),
            None => return bilinear_mc(a, b, rho, opts.mc_samples, opts.seed),
        }
    }
    Ok(Estimate::combine(&parts))
}

fn grid_bilinear(grid: &QuadratureGrid, a: &Partition, b: &Partition, rho: Correlation) -> Result<Estimate> {
    let op = GridOperator::new(grid, rho)?;
    let mut terms = Vec::with_capacity(a.m());
    for (x, y) in a.sets().iter().zip(b.sets()) {
        if let (Region::Grid(gx), Region::Grid(gy)) = (x, y) {
            terms.push(op.bilinear(grid, &gx.values(), &gy.values()));
        }
    }
    Ok(Estimate {
        value: crate::par::tree_sum(&terms),
        method: Method::Quadrature,
        error_estimate: op.defect() * a.m() as f64 + 1e-12,
        samples_or_nodes: grid.len() as u64,
    })
}

/// `P(X in a, Y in b)` for a `rho`-correlated pair, when a deterministic path exists.
fn pair_mass(a: &Region, b: &Region, rho: f64) -> Result<Option<Estimate>> {
    match (a, b) {
        (Region::Halfspace { normal: ua, offset: ca }, Region::Halfspace { normal: ub, offset: cb }) => {
            Ok(Some(Estimate::closed(orthant(*ca, *cb, rho * dot(ua, ub)))))
        }
        (Region::SimplexCone(c), other) | (other, Region::SimplexCone(c)) if c.m() == 3 => {
            let Some(cons) = other.constraints() else { return Ok(None) };
            if cons.len() > 2 || !in_plane(c, &cons) {
                return Ok(None);
            }
            if rho.abs() >= QUADRATURE_RHO_LIMIT {
                return Err(Error::CorrelationNotAllowed { rho, reason: "cone quadrature requires |rho| < 0.9995" });
            }
            let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
            let f = |x: &[f64]| polyhedral_value(&cons, x, rho, s).unwrap_or(0.0);
            let fine = cone_integral(c, &f, Resolution::Fine);
            let coarse = cone_integral(c, &f, Resolution::Coarse);
            Ok(Some(Estimate {
                value: fine,
                method: Method::Quadrature,
                error_estimate: (fine - coarse).abs().max(1e-14),
                samples_or_nodes: Resolution::Fine.points() as u64,
            }))
        }
        _ => Ok(None),
    }
}

fn in_plane(c: &Cone, cons: &[(Vec<f64>, f64)]) -> bool {
    let Some((e1, e2)) = c.plane_basis() else { return false };
    cons.iter().all(|(n, _)| {
        let (a, b) = (dot(n, &e1), dot(n, &e2));
        (a * a + b * b - 1.0).abs() < 1e-12
    })
}

#[derive(Clone, Copy)]
enum Resolution {
    Fine,
    Coarse,
}

impl Resolution {
    fn angular(self) -> usize {
        match self {
            Resolution::Fine => 48,
            Resolution::Coarse => 32,
        }
    }

    fn panel(self) -> f64 {
        match self {
            Resolution::Fine => 0.5,
            Resolution::Coarse => 0.75,
        }
    }

    fn points(self) -> usize {
        self.angular() * 10 * (13.0 / self.panel()).ceil() as usize
    }
}

fn rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static R10: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R32: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R48: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        10 => R10.get_or_init(|| gauss_legendre(10)),
        32 => R32.get_or_init(|| gauss_legendre(32)),
        48 => R48.get_or_init(|| gauss_legendre(48)),
        _ => unreachable!("unsupported rule size"),
    }
}

/// `int_C f dgamma` over a three-vertex cone by polar Gauss–Legendre
/// quadrature about the apex. `f` must depend only on the projection onto the
/// cone's plane.
fn cone_integral(c: &Cone, f: &dyn Fn(&[f64]) -> f64, res: Resolution) -> f64 {
    let (e1, e2) = c.plane_basis().expect("three-vertex cone");
    let d = c.dim();
    let w = (dot(c.apex(), &e1), dot(c.apex(), &e2));
    let z = &c.vertices()[c.index()];
    let phi = dot(z, &e2).atan2(dot(z, &e1));
    let half = PI / (c.m() as f64);
    let (ta, tb) = (phi - half, phi + half);
    let radius = (w.0 * w.0 + w.1 * w.1).sqrt() + 12.0;
    let panels = (radius / res.panel()).ceil() as usize;
    let h = radius / panels as f64;
    let ang = rule(res.angular());
    let rad = rule(10);
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    for (ta_k, wa_k) in ang.0.iter().zip(&ang.1) {
        let theta = 0.5 * (tb - ta) * ta_k + 0.5 * (ta + tb);
        let (ct, st) = (theta.cos(), theta.sin());
        let mut inner = 0.0;
        for p in 0..panels {
            let mid = h * (p as f64 + 0.5);
            let mut acc = 0.0;
            for (tr, wr) in rad.0.iter().zip(&rad.1) {
                let r = mid + 0.5 * h * tr;
                let (p1, p2) = (w.0 + r * ct, w.1 + r * st);
                for t in 0..d {
                    x[t] = p1 * e1[t] + p2 * e2[t];
                }
                let dens = (-0.5 * (p1 * p1 + p2 * p2)).exp() / (2.0 * PI);
                acc += wr * f(&x) * dens * r;
            }
            inner += 0.5 * h * acc;
        }
        total += wa_k * inner;
    }
    0.5 * (tb - ta) * total
}

/// Monte Carlo noise stability from `samples` correlated pairs.
pub fn noise_stability_mc(p: &Partition, rho: Correlation, samples: u64, seed: u64) -> Result<StabilityReport> {
    bilinear_mc(p, p, rho, samples, seed)
}

/// Monte Carlo bilinear stability from `samples` correlated pairs.
pub fn bilinear_noise_stability_mc(pair: &PartitionPair, rho: Correlation, samples: u64, seed: u64) -> Result<StabilityReport> {
    bilinear_mc(pair.first(), pair.second(), rho, samples, seed)
}

fn bilinear_mc(a: &Partition, b: &Partition, rho: Correlation, samples: u64, seed: u64) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let d = a.dim();
    let e = mc::estimate(samples, seed, |rng, out| {
        let mut sampler = CorrelatedSampler::from_rng(rho, rng.clone());
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        for v in out.iter_mut() {
            sampler.fill(&mut x, &mut y);
            *v = match (a.locate(&x), b.locate(&y)) {
                (Some(i), Some(j)) if i == j => 1.0,
                _ => 0.0,
            };
        }
    });
    Ok(Estimate { value: e.mean, method: Method::MonteCarlo, error_estimate: e.err, samples_or_nodes: e.samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::region::simplex_vertices;
    use std::sync::Arc;

    const V3_01: f64 = 0.369_760_463_341_537_8;

    fn rho(v: f64) -> Correlation {
        Correlation::new(v).unwrap()
    }

    #[test]
    fn halfspace_apply() {
        let h = Region::halfspace(vec![1.0, 0.0], 0.0).unwrap();
        let v = ou_apply(&h, &[1.0, 0.0], rho(0.5)).unwrap();
        assert!((v - 0.281_851_430_825_387).abs() < 1e-12);
        assert!((ou_apply(&h, &[3.0, -2.0], rho(0.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!(ou_apply(&h, &[1.0], rho(0.5)).is_err());
    }

    #[test]
    fn whole_space_is_fixed() {
        let g = Arc::new(QuadratureGrid::new(2, 16).unwrap());
        let all = Region::whole(g);
        for x in [[0.0, 0.0], [1.3, -2.2], [5.0, 4.0]] {
            assert!((ou_apply(&all, &x, rho(0.7)).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cone_gradient_matches_difference() {
        let c = Region::cone(simplex_vertices(3, 2).unwrap(), 1, Some(vec![0.2, 0.1])).unwrap();
        let x = [0.4, -0.3];
        let g = ou_gradient(&c, &x, rho(0.6)).unwrap();
        let h = 1e-6;
        for t in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[t] += h;
            xm[t] -= h;
            let fd = (ou_apply(&c, &xp, rho(0.6)).unwrap() - ou_apply(&c, &xm, rho(0.6)).unwrap()) / (2.0 * h);
            assert!((fd - g[t]).abs() < 1e-8);
        }
    }

    #[test]
    fn volumes() {
        assert!((gaussian_volume(&Region::halfspace(vec![1.0, 0.0], 0.0).unwrap()).unwrap().value - 0.5).abs() < 1e-15);
        let one = gaussian_volume(&Region::halfspace(vec![1.0], 1.0).unwrap()).unwrap();
        assert!((one.value - 0.841_344_746_068_542_9).abs() < 1e-15);
        let c = Region::cone(simplex_vertices(3, 2).unwrap(), 2, None).unwrap();
        assert_eq!(gaussian_volume(&c).unwrap().value, 1.0 / 3.0);
        let shifted = Partition::simplex_cones_at(2, 3, Some(vec![0.3, 0.0])).unwrap();
        let total: f64 = shifted.sets().iter().map(|r| gaussian_volume(r).unwrap().value).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn halfspace_stability_closed_form() {
        let p = Partition::halfspaces(2, vec![1.0, 0.0], 0.0).unwrap();
        let s = noise_stability(&p, rho(0.3)).unwrap();
        assert_eq!(s.method, Method::ClosedForm);
        assert!((s.value - (0.5 + 0.3f64.asin() / PI)).abs() < 1e-13);
        assert!((noise_stability(&p, rho(0.0)).unwrap().value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cone_stability_matches_pinned_value() {
        let p = Partition::simplex_cones(2, 3).unwrap();
        let s = noise_stability(&p, rho(0.1)).unwrap();
        assert_eq!(s.method, Method::Quadrature);
        assert!((s.value - V3_01).abs() < 1e-11, "value {}", s.value);
        assert!(s.error_estimate < 1e-9);
    }

    #[test]
    fn product_cones_in_three_dimensions() {
        let p = Partition::simplex_cones(3, 3).unwrap();
        assert!((noise_stability(&p, rho(0.1)).unwrap().value - V3_01).abs() < 1e-11);
    }

    #[test]
    fn negative_correlation_through_reflection() {
        let p = Partition::halfspaces(2, vec![0.6, 0.8], 0.25).unwrap();
        let s = noise_stability(&p, rho(-0.4)).unwrap().value;
        let direct = orthant(0.25, 0.25, -0.4) + orthant(-0.25, -0.25, -0.4);
        assert!((s - direct).abs() < 1e-12);
    }

    #[test]
    fn bilinear_reflected_halfspaces() {
        let p = Partition::halfspaces(2, vec![1.0, 0.0], 0.0).unwrap();
        let pair = PartitionPair::new(p.clone(), reflect_partition(&p)).unwrap();
        let v = bilinear_noise_stability(&pair, rho(0.3)).unwrap().value;
        assert!((v - (0.5 - 0.3f64.asin() / PI)).abs() < 1e-13);
        let diag = PartitionPair::new(p.clone(), p.clone()).unwrap();
        assert_eq!(bilinear_noise_stability(&diag, rho(0.3)).unwrap().value, noise_stability(&p, rho(0.3)).unwrap().value);
        assert!(bilinear_noise_stability(&pair, rho(-0.3)).is_err());
    }

    #[test]
    fn monte_carlo_agrees() {
        let p = Partition::halfspaces(2, vec![1.0, 0.0], 0.0).unwrap();
        let mc = noise_stability_mc(&p, rho(0.3), 200_000, 5).unwrap();
        assert!((mc.value - (0.5 + 0.3f64.asin() / PI)).abs() < mc.error_estimate);
        let four = Partition::simplex_cones(3, 4).unwrap();
        let s = noise_stability(&four, rho(0.2)).unwrap();
        assert_eq!(s.method, Method::MonteCarlo);
    }
}
