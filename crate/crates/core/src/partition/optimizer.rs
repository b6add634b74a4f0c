//! Volume-constrained primal-dual optimization over soft assignments.

use super::assignment::{Objective, SoftAssignment};
use crate::error::{Error, Result};
use crate::gaussian::{Correlation, QuadratureGrid, SimplexVector, QUADRATURE_RHO_LIMIT};
use crate::par::tree_sum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Smallest volume target the grid can resolve.
pub const MIN_VOLUME: f64 = 0.02;
/// Largest allowed volume tolerance.
pub const MAX_VOLUME_TOL: f64 = 1e-2;
/// Node change below which a primal step counts as stationary.
const STATIONARY_TOL: f64 = 1e-9;
/// Iterations over which a feasible run must stall to count as converged.
const STALL_WINDOW: usize = 100;
/// Largest objective change across [`STALL_WINDOW`] that counts as a stall.
const STALL_TOL: f64 = 1e-7;

/// Feasible throughout the last window with an objective that barely moves.
fn stalled(trace: &[TraceRow], tol: f64) -> bool {
    let n = trace.len();
    if n <= STALL_WINDOW {
        return false;
    }
    let window = &trace[n - 1 - STALL_WINDOW..];
    window.iter().all(|r| r.max_volume_violation <= tol) && (window[STALL_WINDOW].objective - window[0].objective).abs() <= STALL_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Maximize `sum_i int f_i T_rho f_i`.
    MaximizeSingle,
    /// Minimize `sum_i int f_i T_rho g_i` over pairs `(f, g)`.
    MinimizeBilinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub rho: Correlation,
    pub m: usize,
    pub d: usize,
    pub nodes_per_dim: usize,
    pub volume_targets: SimplexVector,
    pub primal_step: f64,
    pub dual_step: f64,
    /// Weight of the quadratic volume penalty.
    pub penalty: f64,
    /// Primal steps between dual updates.
    pub dual_interval: usize,
    pub max_iters: usize,
    pub volume_tol: f64,
    pub seed: u64,
    pub mode: Mode,
    pub restarts: usize,
    /// Amplitude of the initial perturbation of the target vector.
    pub init_noise: f64,
}

impl OptimizerConfig {
    /// Defaults for equal volumes on the default grid.
    pub fn new(rho: Correlation, m: usize, d: usize) -> Self {
        Self {
            rho,
            m,
            d,
            nodes_per_dim: QuadratureGrid::default_nodes(d),
            volume_targets: SimplexVector::uniform(m.max(1)),
            primal_step: 0.5,
            dual_step: 2.0,
            penalty: 4.0,
            dual_interval: 5,
            max_iters: 2000,
            volume_tol: 1e-3,
            seed: 0,
            mode: Mode::MaximizeSingle,
            restarts: 8,
            init_noise: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if !(1..=3).contains(&self.d) {
            return bad(format!("dimension {} outside 1..=3", self.d));
        }
        if self.volume_targets.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: self.volume_targets.len() });
        }
        if self.m > 1 {
            if let Some(a) = self.volume_targets.entries().iter().find(|a| **a < MIN_VOLUME) {
                return bad(format!("volume target {a} is below {MIN_VOLUME}"));
            }
        }
        for (name, v) in [("primalStep", self.primal_step), ("dualStep", self.dual_step)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.penalty.is_finite() && self.penalty >= 0.0) {
            return bad(format!("penalty must be nonnegative, got {}", self.penalty));
        }
        if self.primal_step * self.penalty > 2.0 {
            return bad("primalStep * penalty must not exceed 2".into());
        }
        if !(self.volume_tol > 0.0 && self.volume_tol <= MAX_VOLUME_TOL) {
            return bad(format!("volumeTol must lie in (0, {MAX_VOLUME_TOL}], got {}", self.volume_tol));
        }
        if self.dual_interval == 0 || self.restarts == 0 {
            return bad("dualInterval and restarts must be positive".into());
        }
        if !(self.init_noise >= 0.0 && self.init_noise.is_finite()) {
            return bad("initNoise must be nonnegative".into());
        }
        let r = self.rho.value();
        if !(0.0..QUADRATURE_RHO_LIMIT).contains(&r) {
            return Err(Error::CorrelationNotAllowed { rho: r, reason: "the optimizer runs for 0 <= rho < 0.9995; use bilinear mode for negative correlation" });
        }
        QuadratureGrid::new(self.d, self.nodes_per_dim)?;
        Ok(())
    }
}

/// Serialized form of [`OptimizerConfig`]; omitted fields take the defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OptimizerSpec {
    pub rho: f64,
    pub m: usize,
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes_per_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume_targets: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_interval: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_noise: Option<f64>,
}

impl OptimizerSpec {
    pub fn into_config(self) -> Result<OptimizerConfig> {
        let mut c = OptimizerConfig::new(Correlation::new(self.rho)?, self.m, self.d);
        if let Some(v) = self.nodes_per_dim {
            c.nodes_per_dim = v;
        }
        if let Some(v) = self.volume_targets {
            c.volume_targets = SimplexVector::new(v)?;
        }
        c.primal_step = self.primal_step.unwrap_or(c.primal_step);
        c.dual_step = self.dual_step.unwrap_or(c.dual_step);
        c.penalty = self.penalty.unwrap_or(c.penalty);
        c.dual_interval = self.dual_interval.unwrap_or(c.dual_interval);
        c.max_iters = self.max_iters.unwrap_or(c.max_iters);
        c.volume_tol = self.volume_tol.unwrap_or(c.volume_tol);
        c.seed = self.seed.unwrap_or(c.seed);
        c.mode = self.mode.unwrap_or(c.mode);
        c.restarts = self.restarts.unwrap_or(c.restarts);
        c.init_noise = self.init_noise.unwrap_or(c.init_noise);
        c.validate()?;
        Ok(c)
    }
}

impl From<&OptimizerConfig> for OptimizerSpec {
    fn from(c: &OptimizerConfig) -> Self {
        Self {
            rho: c.rho.value(),
            m: c.m,
            d: c.d,
            nodes_per_dim: Some(c.nodes_per_dim),
            volume_targets: Some(c.volume_targets.entries().to_vec()),
            primal_step: Some(c.primal_step),
            dual_step: Some(c.dual_step),
            penalty: Some(c.penalty),
            dual_interval: Some(c.dual_interval),
            max_iters: Some(c.max_iters),
            volume_tol: Some(c.volume_tol),
            seed: Some(c.seed),
            mode: Some(c.mode),
            restarts: Some(c.restarts),
            init_noise: Some(c.init_noise),
        }
    }
}

/// One primal step of the run that was kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub max_volume_violation: f64,
    /// Augmented Lagrangian at the multipliers in force for this step.
    pub lagrangian: f64,
    /// A dual update happened between the previous row and this one.
    pub after_dual_update: bool,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub assignment: SoftAssignment,
    /// The second assignment in bilinear mode.
    pub partner: Option<SoftAssignment>,
    pub objective: f64,
    pub max_volume_violation: f64,
    pub converged: bool,
    pub iterations: usize,
    pub restart: usize,
    pub multipliers: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

impl OptimizeResult {
    /// CSV with header `iter,objective,maxVolumeViolation`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,objective,maxVolumeViolation\n");
        for r in &self.trace {
            out.push_str(&format!("{},{:.12e},{:.6e}\n", r.iter, r.objective, r.max_volume_violation));
        }
        out
    }
}

/// Euclidean projection onto the probability simplex, in place.
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (j, x) in u.iter().enumerate() {
        acc += x;
        let t = (acc - 1.0) / (j as f64 + 1.0);
        if x - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Weighted-mean-free perturbation of the target vector at every node.
fn initial_assignment(grid: &Arc<QuadratureGrid>, targets: &[f64], noise: f64, rng: &mut ChaCha8Rng) -> SoftAssignment {
    let (m, len) = (targets.len(), grid.len());
    let mut z = vec![0.0; m * len];
    for k in 0..len {
        let mut mean = 0.0;
        for i in 0..m {
            let u: f64 = rng.random_range(-1.0..1.0);
            z[i * len + k] = u;
            mean += u / m as f64;
        }
        for i in 0..m {
            z[i * len + k] -= mean;
        }
    }
    for i in 0..m {
        let mu = grid.integrate(&z[i * len..(i + 1) * len]);
        for v in &mut z[i * len..(i + 1) * len] {
            *v -= mu;
        }
    }
    let peak = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = targets.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = if peak > 0.0 { noise.min(0.5 * floor) / peak } else { 0.0 };
    let values = (0..m * len).map(|idx| targets[idx / len] + scale * z[idx]).collect();
    SoftAssignment::from_raw(grid.clone(), m, values)
}

struct Run {
    f: SoftAssignment,
    g: Option<SoftAssignment>,
    objective: f64,
    violation: f64,
    converged: bool,
    iterations: usize,
    multipliers: Vec<f64>,
    trace: Vec<TraceRow>,
}

fn violation(vols: &[f64], targets: &[f64]) -> f64 {
    vols.iter().zip(targets).map(|(v, a)| (v - a).abs()).fold(0.0, f64::max)
}

/// One projected step `f <- Proj(f + step * (sign * score - lambda_i - kappa (gamma_i - a_i)))`
/// at every node; returns the largest change.
fn primal_step(f: &mut SoftAssignment, score: &[f64], lambda: &[f64], vols: &[f64], cfg: &OptimizerConfig, sign: f64) -> f64 {
    let (m, len) = (f.m(), f.len());
    let targets = cfg.volume_targets.entries();
    let shift: Vec<f64> = (0..m).map(|i| lambda[i] + cfg.penalty * (vols[i] - targets[i])).collect();
    let values = f.values_mut();
    let mut change = 0.0f64;
    let mut node = vec![0.0; m];
    for k in 0..len {
        for i in 0..m {
            node[i] = values[i * len + k] + cfg.primal_step * (sign * score[i * len + k] - shift[i]);
        }
        project_simplex(&mut node);
        for i in 0..m {
            change = change.max((node[i] - values[i * len + k]).abs());
            values[i * len + k] = node[i];
        }
    }
    change
}

fn lagrangian(objective: f64, lambda: &[f64], vols: &[f64], targets: &[f64], kappa: f64, sign: f64) -> f64 {
    let terms: Vec<f64> = (0..lambda.len())
        .map(|i| {
            let e = vols[i] - targets[i];
            lambda[i] * e + 0.5 * kappa * e * e
        })
        .collect();
    objective - sign * tree_sum(&terms)
}

fn run_single(obj: &Objective, cfg: &OptimizerConfig, rng: &mut ChaCha8Rng) -> Result<Run> {
    let targets = cfg.volume_targets.entries();
    let m = cfg.m;
    let mut f = initial_assignment(obj.grid(), targets, cfg.init_noise, rng);
    let mut lambda = vec![0.0; m];
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut tf = obj.smooth(&f)?;
    let mut vols = f.volumes();
    let mut best: Option<(f64, SoftAssignment, f64)> = None;
    let mut after_dual = false;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..cfg.max_iters {
        let score: Vec<f64> = tf.iter().map(|v| 2.0 * v).collect();
        let change = primal_step(&mut f, &score, &lambda, &vols, cfg, 1.0);
        tf = obj.smooth(&f)?;
        vols = f.volumes();
        let objective = obj.value(&f)?;
        let viol = violation(&vols, targets);
        trace.push(TraceRow {
            iter,
            objective,
            max_volume_violation: viol,
            lagrangian: lagrangian(objective, &lambda, &vols, targets, cfg.penalty, 1.0),
            after_dual_update: after_dual,
        });
        iterations = iter + 1;
        if viol <= cfg.volume_tol && best.as_ref().is_none_or(|b| objective > b.0) {
            best = Some((objective, f.clone(), viol));
        }
        if viol <= cfg.volume_tol && (change <= STATIONARY_TOL && iter >= cfg.dual_interval || stalled(&trace, cfg.volume_tol)) {
            converged = true;
            break;
        }
        after_dual = (iter + 1) % cfg.dual_interval == 0;
        if after_dual {
            for i in 0..m {
                lambda[i] += cfg.dual_step * (vols[i] - targets[i]);
            }
        }
    }
    let (objective, f, violation) = match best {
        Some(b) if !converged => b,
        _ => (obj.value(&f)?, f, violation(&vols, targets)),
    };
    Ok(Run { f, g: None, objective, violation, converged, iterations, multipliers: lambda, trace })
}

fn run_bilinear(obj: &Objective, cfg: &OptimizerConfig, rng: &mut ChaCha8Rng) -> Result<Run> {
    let targets = cfg.volume_targets.entries();
    let m = cfg.m;
    let mut f = initial_assignment(obj.grid(), targets, cfg.init_noise, rng);
    let mut g = initial_assignment(obj.grid(), targets, cfg.init_noise, rng);
    let mut lf = vec![0.0; m];
    let mut lg = vec![0.0; m];
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut best: Option<(f64, SoftAssignment, SoftAssignment, f64)> = None;
    let mut after_dual = false;
    let mut converged = false;
    let mut iterations = 0;
    let (mut vf, mut vg) = (f.volumes(), g.volumes());
    for iter in 0..cfg.max_iters {
        let tg = obj.smooth(&g)?;
        let cf = primal_step(&mut f, &tg, &lf, &vf, cfg, -1.0);
        vf = f.volumes();
        let tf = obj.smooth(&f)?;
        let cg = primal_step(&mut g, &tf, &lg, &vg, cfg, -1.0);
        vg = g.volumes();
        let objective = obj.bilinear(&f, &g)?;
        let viol = violation(&vf, targets).max(violation(&vg, targets));
        let lag = lagrangian(objective, &lf, &vf, targets, cfg.penalty, -1.0) + lagrangian(0.0, &lg, &vg, targets, cfg.penalty, -1.0);
        trace.push(TraceRow { iter, objective, max_volume_violation: viol, lagrangian: lag, after_dual_update: after_dual });
        iterations = iter + 1;
        if viol <= cfg.volume_tol && best.as_ref().is_none_or(|b| objective < b.0) {
            best = Some((objective, f.clone(), g.clone(), viol));
        }
        if viol <= cfg.volume_tol && (cf.max(cg) <= STATIONARY_TOL && iter >= cfg.dual_interval || stalled(&trace, cfg.volume_tol)) {
            converged = true;
            break;
        }
        after_dual = (iter + 1) % cfg.dual_interval == 0;
        if after_dual {
            for i in 0..m {
                lf[i] += cfg.dual_step * (vf[i] - targets[i]);
                lg[i] += cfg.dual_step * (vg[i] - targets[i]);
            }
        }
    }
    let (objective, f, g, violation) = match best {
        Some(b) if !converged => b,
        _ => (obj.bilinear(&f, &g)?, f, g, violation(&vf, targets).max(violation(&vg, targets))),
    };
    lf.extend(lg);
    Ok(Run { f, g: Some(g), objective, violation, converged, iterations, multipliers: lf, trace })
}

/// Runs the primal-dual loop from `restarts` seeded starts and keeps the best run.
///
/// Each primal step ascends (descends in bilinear mode) the augmented
/// Lagrangian `C(f) - sum_i lambda_i e_i - (kappa/2) sum_i e_i^2`, with
/// `e_i = gamma(f_i) - a_i`, and projects every node onto the simplex. Every
/// `dual_interval` steps the multipliers move by `dual_step * e_i`. Runs that
/// never meet the volume tolerance return their last iterate with
/// `converged = false`.
pub fn optimize(cfg: &OptimizerConfig) -> Result<OptimizeResult> {
    cfg.validate()?;
    let grid = Arc::new(QuadratureGrid::new(cfg.d, cfg.nodes_per_dim)?);
    if cfg.m == 1 {
        let f = SoftAssignment::constant(grid, &SimplexVector::basis(1, 0));
        let partner = (cfg.mode == Mode::MinimizeBilinear).then(|| f.clone());
        return Ok(OptimizeResult {
            assignment: f,
            partner,
            objective: 1.0,
            max_volume_violation: 0.0,
            converged: true,
            iterations: 0,
            restart: 0,
            multipliers: vec![0.0],
            trace: vec![TraceRow { iter: 0, objective: 1.0, max_volume_violation: 0.0, lagrangian: 1.0, after_dual_update: false }],
        });
    }
    let obj = Objective::new(grid, cfg.rho)?;
    let mut best: Option<(usize, Run)> = None;
    for r in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64);
        let run = match cfg.mode {
            Mode::MaximizeSingle => run_single(&obj, cfg, &mut rng)?,
            Mode::MinimizeBilinear => run_bilinear(&obj, cfg, &mut rng)?,
        };
        let better = match &best {
            None => true,
            Some((_, b)) => {
                let feasible = |x: &Run| x.violation <= cfg.volume_tol;
                match (feasible(&run), feasible(b)) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => match cfg.mode {
                        Mode::MaximizeSingle => run.objective > b.objective,
                        Mode::MinimizeBilinear => run.objective < b.objective,
                    },
                }
            }
        };
        if better {
            best = Some((r, run));
        }
    }
    let (restart, run) = best.expect("at least one restart");
    Ok(OptimizeResult {
        assignment: run.f,
        partner: run.g,
        objective: run.objective,
        max_volume_violation: run.violation,
        converged: run.converged,
        iterations: run.iterations,
        restart,
        multipliers: run.multipliers,
        trace: run.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::round_to_partition;

    #[test]
    fn projection_lands_on_simplex() {
        let mut v = vec![0.3, 1.4, -0.2];
        project_simplex(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(v, vec![0.0, 1.0, 0.0]);
        let mut w = vec![0.2, 0.3, 0.5];
        project_simplex(&mut w);
        assert!((w[0] - 0.2).abs() < 1e-15 && (w[2] - 0.5).abs() < 1e-15);
        let mut u = vec![0.5, 0.5, 0.5];
        project_simplex(&mut u);
        assert!(u.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn config_validation() {
        let r = Correlation::new(0.3).unwrap();
        let mut c = OptimizerConfig::new(r, 2, 2);
        assert!(c.validate().is_ok());
        c.volume_tol = 0.02;
        assert!(c.validate().is_err());
        c = OptimizerConfig::new(r, 2, 2);
        c.volume_targets = SimplexVector::new(vec![0.99, 0.01]).unwrap();
        assert!(c.validate().is_err());
        c = OptimizerConfig::new(r, 2, 2);
        c.primal_step = 0.0;
        assert!(c.validate().is_err());
        c = OptimizerConfig::new(Correlation::new(-0.3).unwrap(), 2, 2);
        assert!(c.validate().is_err());
    }

    #[test]
    fn spec_round_trip() {
        let spec: OptimizerSpec = serde_json::from_str(r#"{"rho":0.3,"m":2,"d":1,"maxIters":50,"mode":"minimize-bilinear"}"#).unwrap();
        let c = spec.into_config().unwrap();
        assert_eq!(c.max_iters, 50);
        assert_eq!(c.mode, Mode::MinimizeBilinear);
        let back = OptimizerSpec::from(&c).into_config().unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<OptimizerSpec>(r#"{"rho":0.3,"m":2,"d":1,"bogus":1}"#).is_err());
    }

    #[test]
    fn single_set_is_trivial() {
        let c = OptimizerConfig::new(Correlation::new(0.3).unwrap(), 1, 2);
        let r = optimize(&c).unwrap();
        assert_eq!(r.objective, 1.0);
        assert!(r.converged);
    }

    #[test]
    fn halfline_in_one_dimension() {
        let mut c = OptimizerConfig::new(Correlation::new(0.3).unwrap(), 2, 1);
        c.restarts = 2;
        let r = optimize(&c).unwrap();
        let p = round_to_partition(&r.assignment).unwrap();
        let v = crate::gaussian::noise_stability(&p, c.rho).unwrap().value;
        let exact = 0.5 + 0.3f64.asin() / std::f64::consts::PI;
        assert!((v - exact).abs() < 2e-3, "{v} vs {exact}");
        let vols: Vec<f64> = p.sets().iter().map(|s| crate::gaussian::gaussian_volume(s).unwrap().value).collect();
        assert!((vols[0] - 0.5).abs() < 1e-2);
        for w in r.trace.windows(2) {
            if !w[1].after_dual_update {
                assert!(w[1].lagrangian >= w[0].lagrangian - 1e-9, "{w:?}");
            }
        }
    }

    #[test]
    fn bilinear_mode_pairs_opposite_halflines() {
        let mut c = OptimizerConfig::new(Correlation::new(0.3).unwrap(), 2, 1);
        c.mode = Mode::MinimizeBilinear;
        c.restarts = 2;
        let r = optimize(&c).unwrap();
        let exact = 0.5 - 0.3f64.asin() / std::f64::consts::PI;
        assert!((r.objective - exact).abs() < 2e-3, "{} vs {exact}", r.objective);
        for w in r.trace.windows(2) {
            if !w[1].after_dual_update {
                assert!(w[1].lagrangian <= w[0].lagrangian + 1e-9, "{w:?}");
            }
        }
    }
}
