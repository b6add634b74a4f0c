//! Influences `Inf_i(f_j) = E[(f_j - E_i f_j)^2]`.

use super::rule::VotingRule;
use super::stability::{check_budget, output_table};
use crate::error::{Error, Result};
use crate::mc;
use crate::par::{map_indexed, tree_sum};
use rand::Rng;

/// `values[i][j] = Inf_i(f_j)`; `errors` is present for Monte Carlo estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceVector {
    pub values: Vec<Vec<f64>>,
    pub errors: Option<Vec<Vec<f64>>>,
}

impl InfluenceVector {
    pub fn voters(&self) -> usize {
        self.values.len()
    }

    /// `sum_j Inf_i(f_j)` per voter.
    pub fn totals(&self) -> Vec<f64> {
        self.values.iter().map(|r| r.iter().sum()).collect()
    }
}

/// Exact influences by enumeration (`m^n <= 3^8`).
pub fn influences(rule: &VotingRule) -> Result<InfluenceVector> {
    let size = check_budget(rule)?;
    let (m, n) = (rule.m(), rule.n());
    let table = output_table(rule, size);
    let values = map_indexed(n, |voter| {
        let stride = m.pow((n - 1 - voter) as u32);
        (0..m)
            .map(|j| {
                let terms: Vec<f64> = (0..size)
                    .map(|code| {
                        let digit = (code / stride) % m;
                        let base = code - digit * stride;
                        let avg = (0..m).map(|b| table[(base + b * stride) * m + j]).sum::<f64>() / m as f64;
                        let d = table[code * m + j] - avg;
                        d * d
                    })
                    .collect();
                tree_sum(&terms) / size as f64
            })
            .collect()
    });
    Ok(InfluenceVector { values, errors: None })
}

/// Monte Carlo influences for rules too large to enumerate.
pub fn influences_mc(rule: &VotingRule, samples: u64, seed: u64) -> Result<InfluenceVector> {
    if samples == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
    }
    let (m, n) = (rule.m(), rule.n());
    let k = n * m;
    let est = mc::estimate_many(samples, seed, k, |rng, out| {
        let mut ballot = vec![0usize; n];
        let mut f = vec![0.0; m];
        let mut g = vec![0.0; m];
        let mut avg = vec![0.0; m];
        for s in 0..out.len() / k {
            for b in ballot.iter_mut() {
                *b = rng.random_range(0..m);
            }
            rule.eval_into(&ballot, &mut f);
            for voter in 0..n {
                let keep = ballot[voter];
                avg.fill(0.0);
                for b in 0..m {
                    ballot[voter] = b;
                    rule.eval_into(&ballot, &mut g);
                    for (a, v) in avg.iter_mut().zip(&g) {
                        *a += v / m as f64;
                    }
                }
                ballot[voter] = keep;
                for j in 0..m {
                    let d = f[j] - avg[j];
                    out[s * k + voter * m + j] = d * d;
                }
            }
        }
    });
    let values = (0..n).map(|i| (0..m).map(|j| est[i * m + j].mean).collect()).collect();
    let errors = (0..n).map(|i| (0..m).map(|j| est[i * m + j].err).collect()).collect();
    Ok(InfluenceVector { values, errors: Some(errors) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rule_has_no_influence() {
        let inf = influences(&VotingRule::constant(3, 4, 1).unwrap()).unwrap();
        assert!(inf.values.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn dictator_influence() {
        let inf = influences(&VotingRule::dictator(2, 3, 0).unwrap()).unwrap();
        assert!((inf.values[0][0] - 0.25).abs() < 1e-15);
        assert_eq!(inf.values[1][0], 0.0);
        assert_eq!(inf.values[2][1], 0.0);
    }

    #[test]
    fn plurality_symmetry() {
        let inf = influences(&VotingRule::plurality(3, 5).unwrap()).unwrap();
        for j in 0..3 {
            for i in 1..5 {
                assert!((inf.values[i][j] - inf.values[0][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let rule = VotingRule::plurality(3, 4).unwrap();
        let exact = influences(&rule).unwrap();
        let mc = influences_mc(&rule, 100_000, 3).unwrap();
        let err = mc.errors.as_ref().unwrap();
        for ((ex, est), e) in exact.values.iter().zip(&mc.values).zip(err) {
            for j in 0..3 {
                assert!((ex[j] - est[j]).abs() <= e[j] + 1e-12);
            }
        }
    }
}
