//! Voting rules `{1..m}^n -> Delta_m`.

use crate::error::{Error, Result};
use crate::gaussian::SimplexVector;
use serde::{Deserialize, Serialize};

/// Largest table size accepted (`m^n` entries).
pub const TABLE_LIMIT: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    /// `e_j` for the strict mode `j`, otherwise the uniform vector.
    Plurality,
    /// Two-candidate majority; ties (even `n`) give the uniform vector.
    Majority,
    /// Output `e_{omega_i}` for the zero-based voter `i`.
    Dictator(usize),
    /// Always `e_j`, zero-based `j`.
    Constant(usize),
    /// Explicit outputs indexed by ballot code.
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VotingRule {
    m: usize,
    n: usize,
    kind: RuleKind,
}

fn check_mn(m: usize, n: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least two candidates, got {m}")));
    }
    if n < 1 {
        return Err(Error::InvalidArgument("need at least one voter".into()));
    }
    Ok(())
}

/// `m^n`, saturating.
pub fn ballot_count(m: usize, n: usize) -> u128 {
    (0..n).fold(1u128, |acc, _| acc.saturating_mul(m as u128))
}

impl VotingRule {
    pub fn plurality(m: usize, n: usize) -> Result<Self> {
        check_mn(m, n)?;
        Ok(Self { m, n, kind: RuleKind::Plurality })
    }

    pub fn majority(n: usize) -> Result<Self> {
        check_mn(2, n)?;
        Ok(Self { m: 2, n, kind: RuleKind::Majority })
    }

    /// Dictatorship of the zero-based voter `i`.
    pub fn dictator(m: usize, n: usize, i: usize) -> Result<Self> {
        check_mn(m, n)?;
        if i >= n {
            return Err(Error::InvalidArgument(format!("dictator {} outside 1..={n}", i + 1)));
        }
        Ok(Self { m, n, kind: RuleKind::Dictator(i) })
    }

    /// The constant rule `e_j`, zero-based `j`.
    pub fn constant(m: usize, n: usize, j: usize) -> Result<Self> {
        check_mn(m, n)?;
        if j >= m {
            return Err(Error::InvalidArgument(format!("constant output {} outside 1..={m}", j + 1)));
        }
        Ok(Self { m, n, kind: RuleKind::Constant(j) })
    }

    /// Table rule; `outputs[code]` is the output for the ballot with that code
    /// (see [`VotingRule::decode`]).
    pub fn table(m: usize, n: usize, outputs: Vec<SimplexVector>) -> Result<Self> {
        check_mn(m, n)?;
        let size = ballot_count(m, n);
        if size > TABLE_LIMIT as u128 {
            return Err(Error::BudgetExceeded { size, budget: TABLE_LIMIT as u128 });
        }
        if outputs.len() as u128 != size {
            return Err(Error::InvalidArgument(format!("table has {} outputs, expected {size}", outputs.len())));
        }
        if let Some(v) = outputs.iter().find(|v| v.len() != m) {
            return Err(Error::InvalidSimplex(format!("output of length {} for m = {m}", v.len())));
        }
        Ok(Self { m, n, kind: RuleKind::Table(outputs.into_iter().map(SimplexVector::into_inner).collect()) })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    /// Output for a ballot with entries in `1..=m`.
    pub fn evaluate(&self, ballot: &[usize]) -> Result<SimplexVector> {
        if ballot.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: ballot.len() });
        }
        if let Some((position, &value)) = ballot.iter().enumerate().find(|(_, &v)| v == 0 || v > self.m) {
            return Err(Error::BallotOutOfRange { position: position + 1, value, m: self.m });
        }
        let zero: Vec<usize> = ballot.iter().map(|v| v - 1).collect();
        let mut out = vec![0.0; self.m];
        self.eval_into(&zero, &mut out);
        SimplexVector::new(out)
    }

    /// Output for a zero-based ballot, written into `out` (length `m`).
    pub fn eval_into(&self, ballot: &[usize], out: &mut [f64]) {
        out.fill(0.0);
        match &self.kind {
            RuleKind::Plurality | RuleKind::Majority => {
                if self.m > 16 {
                    return self.plurality_large(ballot, out);
                }
                let mut buf = [0usize; 16];
                let counts = &mut buf[..self.m];
                for &b in ballot {
                    counts[b] += 1;
                }
                match strict_mode(counts) {
                    Some(j) => out[j] = 1.0,
                    None => out.fill(1.0 / self.m as f64),
                }
            }
            RuleKind::Dictator(i) => out[ballot[*i]] = 1.0,
            RuleKind::Constant(j) => out[*j] = 1.0,
            RuleKind::Table(t) => out.copy_from_slice(&t[self.encode(ballot)]),
        }
    }

    fn plurality_large(&self, ballot: &[usize], out: &mut [f64]) {
        let mut counts = vec![0usize; self.m];
        for &b in ballot {
            counts[b] += 1;
        }
        match strict_mode(&counts) {
            Some(j) => out[j] = 1.0,
            None => out.fill(1.0 / self.m as f64),
        }
    }

    /// Smallest `L` with every output entry in `Z / L`, when one exists for
    /// builtin rules or small-denominator tables.
    pub fn output_scale(&self) -> Option<f64> {
        match &self.kind {
            // Ties, and with them the 1/m entries, need two voters and cannot happen for two candidates and odd n.
            RuleKind::Plurality | RuleKind::Majority if self.n == 1 || (self.m == 2 && self.n % 2 == 1) => Some(1.0),
            RuleKind::Plurality | RuleKind::Majority => Some(self.m as f64),
            RuleKind::Dictator(_) | RuleKind::Constant(_) => Some(1.0),
            RuleKind::Table(t) => {
                let lcm = (1..=self.m as u64).fold(1u64, |acc, k| acc / gcd(acc, k) * k);
                (1..=lcm)
                    .filter(|l| lcm % l == 0)
                    .map(|l| l as f64)
                    .find(|&l| t.iter().flatten().all(|v| ((v * l).round() - v * l).abs() < 1e-9))
            }
        }
    }

    /// Ballot code with voter 0 as the most significant base-`m` digit.
    pub fn encode(&self, ballot: &[usize]) -> usize {
        ballot.iter().fold(0, |acc, &b| acc * self.m + b)
    }

    pub fn decode(&self, mut code: usize, ballot: &mut [usize]) {
        for slot in ballot.iter_mut().rev() {
            *slot = code % self.m;
            code /= self.m;
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TableDoc = serde_json::from_str(text)?;
        check_mn(doc.m, doc.n)?;
        let size = ballot_count(doc.m, doc.n);
        if size > TABLE_LIMIT as u128 {
            return Err(Error::BudgetExceeded { size, budget: TABLE_LIMIT as u128 });
        }
        let probe = Self { m: doc.m, n: doc.n, kind: RuleKind::Constant(0) };
        let mut outputs: Vec<Option<SimplexVector>> = vec![None; size as usize];
        for e in doc.entries {
            if e.ballot.len() != doc.n {
                return Err(Error::DimensionMismatch { expected: doc.n, got: e.ballot.len() });
            }
            if let Some((position, &value)) = e.ballot.iter().enumerate().find(|(_, &v)| v == 0 || v > doc.m) {
                return Err(Error::BallotOutOfRange { position: position + 1, value, m: doc.m });
            }
            let zero: Vec<usize> = e.ballot.iter().map(|v| v - 1).collect();
            let code = probe.encode(&zero);
            if outputs[code].is_some() {
                return Err(Error::InvalidArgument(format!("ballot {:?} listed twice", e.ballot)));
            }
            outputs[code] = Some(SimplexVector::new(e.output)?);
        }
        let outputs = outputs
            .into_iter()
            .enumerate()
            .map(|(code, o)| {
                o.ok_or_else(|| {
                    let mut b = vec![0; doc.n];
                    probe.decode(code, &mut b);
                    let one: Vec<usize> = b.iter().map(|v| v + 1).collect();
                    Error::InvalidArgument(format!("table is missing ballot {one:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::table(doc.m, doc.n, outputs)
    }

    /// Table document listing every ballot (one-based entries).
    pub fn to_json(&self) -> Result<String> {
        let size = ballot_count(self.m, self.n);
        if size > TABLE_LIMIT as u128 {
            return Err(Error::BudgetExceeded { size, budget: TABLE_LIMIT as u128 });
        }
        let mut ballot = vec![0; self.n];
        let mut out = vec![0.0; self.m];
        let entries = (0..size as usize)
            .map(|code| {
                self.decode(code, &mut ballot);
                self.eval_into(&ballot, &mut out);
                TableEntry { ballot: ballot.iter().map(|v| v + 1).collect(), output: out.clone() }
            })
            .collect();
        Ok(serde_json::to_string(&TableDoc { m: self.m, n: self.n, entries })?)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn strict_mode(counts: &[usize]) -> Option<usize> {
    let max = *counts.iter().max()?;
    let mut it = counts.iter().enumerate().filter(|(_, &c)| c == max);
    let first = it.next().map(|(j, _)| j);
    if it.next().is_some() {
        None
    } else {
        first
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    m: usize,
    n: usize,
    entries: Vec<TableEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableEntry {
    ballot: Vec<usize>,
    output: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plurality_outputs() {
        let p = VotingRule::plurality(3, 3).unwrap();
        assert_eq!(p.evaluate(&[1, 1, 2]).unwrap().entries(), &[1.0, 0.0, 0.0]);
        let third = 1.0 / 3.0;
        assert_eq!(p.evaluate(&[1, 2, 3]).unwrap().entries(), &[third, third, third]);
        assert!(matches!(p.evaluate(&[1, 4, 2]), Err(Error::BallotOutOfRange { position: 2, value: 4, m: 3 })));
        assert!(p.evaluate(&[0, 1, 2]).is_err());
    }

    #[test]
    fn dictator_and_constant() {
        let d = VotingRule::dictator(4, 3, 0).unwrap();
        assert_eq!(d.evaluate(&[3, 1, 1]).unwrap().entries(), &[0.0, 0.0, 1.0, 0.0]);
        let c = VotingRule::constant(3, 2, 0).unwrap();
        assert_eq!(c.evaluate(&[2, 3]).unwrap().entries(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn majority_equals_two_candidate_plurality() {
        for n in [1usize, 3, 5, 7] {
            let maj = VotingRule::majority(n).unwrap();
            let plu = VotingRule::plurality(2, n).unwrap();
            let mut b = vec![0; n];
            let (mut x, mut y) = (vec![0.0; 2], vec![0.0; 2]);
            for code in 0..1usize << n {
                maj.decode(code, &mut b);
                maj.eval_into(&b, &mut x);
                plu.eval_into(&b, &mut y);
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let r = VotingRule::plurality(3, 4).unwrap();
        let mut b = vec![0; 4];
        for code in 0..81 {
            r.decode(code, &mut b);
            assert_eq!(r.encode(&b), code);
        }
    }

    #[test]
    fn table_json_round_trip() {
        let p = VotingRule::plurality(3, 2).unwrap();
        let text = p.to_json().unwrap();
        let t = VotingRule::from_json(&text).unwrap();
        let mut b = vec![0; 2];
        let (mut x, mut y) = (vec![0.0; 3], vec![0.0; 3]);
        for code in 0..9 {
            p.decode(code, &mut b);
            p.eval_into(&b, &mut x);
            t.eval_into(&b, &mut y);
            assert_eq!(x, y);
        }
        assert_eq!(t.output_scale(), p.output_scale());
        assert_eq!(VotingRule::plurality(3, 1).unwrap().output_scale(), Some(1.0));
        let missing = r#"{"m":2,"n":1,"entries":[{"ballot":[1],"output":[1,0]}]}"#;
        assert!(VotingRule::from_json(missing).is_err());
        let bad = r#"{"m":2,"n":1,"entries":[{"ballot":[1],"output":[1,0]},{"ballot":[2],"output":[0.7,0.7]}]}"#;
        assert!(VotingRule::from_json(bad).is_err());
    }
}
