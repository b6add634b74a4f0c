//! Discrete noise stability by exact enumeration and Monte Carlo.

use super::channel::TransitionModel;
use super::rule::{ballot_count, VotingRule};
use crate::error::{Error, Result};
use crate::gaussian::{noise_stability, Correlation, Estimate, Method, Partition};
use crate::mc;
use crate::par::{map_indexed, tree_sum};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Enumeration budget for exact computations, `3^8` ballots.
pub const ENUMERATION_BUDGET: u128 = 6561;

pub(crate) fn check_budget(rule: &VotingRule) -> Result<usize> {
    let size = ballot_count(rule.m(), rule.n());
    if size > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded { size, budget: ENUMERATION_BUDGET });
    }
    Ok(size as usize)
}

/// All outputs, `out[code * m + j]`.
pub(crate) fn output_table(rule: &VotingRule, size: usize) -> Vec<f64> {
    let m = rule.m();
    let rows: Vec<Vec<f64>> = map_indexed(size, |code| {
        let mut ballot = vec![0; rule.n()];
        rule.decode(code, &mut ballot);
        let mut out = vec![0.0; m];
        rule.eval_into(&ballot, &mut out);
        out
    });
    rows.concat()
}

/// Hamming-distance profile `C_k = sum_j sum_{d(w,s) = k} f_j(w) f_j(s)` of
/// the outputs scaled by `scale`.
///
/// One sweep per voter turns `f_j` into the polynomial
/// `P_j(w)(t) = sum_s t^{d(w,s)} f_j(s)`. When the scaled outputs are
/// integers, every operation is exact in `f64`, so the profile does not depend
/// on summation order.
pub(crate) fn distance_profile(rule: &VotingRule, scale: f64) -> Result<Vec<f64>> {
    let size = check_budget(rule)?;
    let (m, n) = (rule.m(), rule.n());
    let table: Vec<f64> = output_table(rule, size).iter().map(|v| v * scale).collect();
    let deg = n + 1;
    let per_candidate: Vec<Vec<f64>> = map_indexed(m, |j| {
        let mut poly = vec![0.0; size * deg];
        for code in 0..size {
            poly[code * deg] = table[code * m + j];
        }
        let mut group_sum = vec![0.0; deg];
        for voter in 0..n {
            let stride = m.pow((n - 1 - voter) as u32);
            let mut next = poly.clone();
            for base in 0..size {
                if (base / stride) % m != 0 {
                    continue;
                }
                group_sum.fill(0.0);
                for b in 0..m {
                    let row = &poly[(base + b * stride) * deg..(base + b * stride + 1) * deg];
                    for (g, v) in group_sum.iter_mut().zip(row) {
                        *g += v;
                    }
                }
                for a in 0..m {
                    let at = (base + a * stride) * deg;
                    for k in 1..deg {
                        next[at + k] = poly[at + k] + group_sum[k - 1] - poly[at + k - 1];
                    }
                }
            }
            poly = next;
        }
        let mut profile = vec![0.0; deg];
        for code in 0..size {
            let f = table[code * m + j];
            if f != 0.0 {
                for k in 0..deg {
                    profile[k] += f * poly[code * deg + k];
                }
            }
        }
        profile
    });
    Ok((0..deg).map(|k| per_candidate.iter().map(|p| p[k]).sum()).collect())
}

/// `S_rho f = sum_j E[f_j(omega) f_j(delta)]` by exact enumeration over all
/// ballot pairs (`m^n <= 3^8`).
pub fn discrete_stability_exact(rule: &VotingRule, rho: Correlation) -> Result<f64> {
    let model = TransitionModel::new(rule.m(), rho)?;
    stability_from_model(rule, &model)
}

pub(crate) fn stability_from_model(rule: &VotingRule, model: &TransitionModel) -> Result<f64> {
    let scale = rule.output_scale().unwrap_or(1.0);
    let profile = distance_profile(rule, scale)?;
    let (m, n) = (rule.m() as f64, rule.n());
    let (stay, switch) = (model.stay_prob(), model.switch_prob());
    let norm = m.powi(n as i32) * scale * scale;
    let mut total = 0.0;
    for (k, c) in profile.iter().enumerate() {
        if *c != 0.0 {
            total += (c / norm) * stay.powi((n - k) as i32) * switch.powi(k as i32);
        }
    }
    Ok(total)
}

/// Exact mean output `E f(omega)` under uniform ballots.
pub fn expected_output(rule: &VotingRule) -> Result<Vec<f64>> {
    let size = check_budget(rule)?;
    let m = rule.m();
    let table = output_table(rule, size);
    Ok((0..m)
        .map(|j| {
            let col: Vec<f64> = (0..size).map(|c| table[c * m + j]).collect();
            tree_sum(&col) / size as f64
        })
        .collect())
}

fn draw_pair(rule: &VotingRule, rng: &mut ChaCha8Rng, omega: &mut [usize], u: &mut [f64]) {
    for (w, v) in omega.iter_mut().zip(u.iter_mut()) {
        *w = rng.random_range(0..rule.m());
        *v = rng.random::<f64>();
    }
}

/// Monte Carlo estimate of `S_rho f`; error is three standard errors.
pub fn discrete_stability_mc(rule: &VotingRule, rho: Correlation, samples: u64, seed: u64) -> Result<Estimate> {
    Ok(discrete_stability_mc_sweep(rule, &[rho], samples, seed)?.remove(0))
}

/// Monte Carlo estimates at several correlations from the same draws.
pub fn discrete_stability_mc_sweep(rule: &VotingRule, rhos: &[Correlation], samples: u64, seed: u64) -> Result<Vec<Estimate>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
    }
    let models = rhos.iter().map(|r| TransitionModel::new(rule.m(), *r)).collect::<Result<Vec<_>>>()?;
    let (m, n, k) = (rule.m(), rule.n(), models.len());
    let est = mc::estimate_many(samples, seed, k, |rng, out| {
        let mut omega = vec![0usize; n];
        let mut delta = vec![0usize; n];
        let mut u = vec![0.0; n];
        let mut fo = vec![0.0; m];
        let mut fd = vec![0.0; m];
        for s in 0..out.len() / k {
            draw_pair(rule, rng, &mut omega, &mut u);
            rule.eval_into(&omega, &mut fo);
            for (j, model) in models.iter().enumerate() {
                for t in 0..n {
                    delta[t] = model.corrupt_symbol(omega[t], u[t]);
                }
                rule.eval_into(&delta, &mut fd);
                out[s * k + j] = fo.iter().zip(&fd).map(|(a, b)| a * b).sum();
            }
        }
    });
    Ok(est
        .into_iter()
        .map(|e| Estimate { value: e.mean, method: Method::MonteCarlo, error_estimate: e.err, samples_or_nodes: e.samples })
        .collect())
}

/// Gaussian stability of the `m`-cone partition of `R^{m-1}`, the limit of
/// plurality stability as the number of voters grows.
pub fn plurality_stability_limit(m: usize, rho: Correlation) -> Result<f64> {
    let r = rho.value();
    if r <= 0.0 {
        return Err(Error::CorrelationNotAllowed { rho: r, reason: "the plurality limit is defined for 0 < rho < 1" });
    }
    let p = match m {
        2 => Partition::halfspaces(1, vec![1.0], 0.0)?,
        3 => Partition::simplex_cones(2, 3)?,
        _ => return Err(Error::Unsupported(format!("plurality limit for m = {m} (supported: 2, 3)"))),
    };
    Ok(noise_stability(&p, rho)?.value)
}
