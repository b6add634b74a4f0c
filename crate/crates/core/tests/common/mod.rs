//! Randomized property checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use noisestab::gaussian::{mehler_kernel, noise_stability, Correlation, GridOperator, Partition, QuadratureGrid};
use noisestab::partition::{round_to_partition, Objective, SoftAssignment};
use noisestab::special::{gauss_legendre, norm_pdf};
use noisestab::voting::{discrete_stability_exact, VotingRule};
use noisestab::SimplexVector;
use proptest::prelude::*;
use proptest::sample::Index;
use std::sync::Arc;

pub fn rho(v: f64) -> Correlation {
    Correlation::new(v).unwrap()
}

/// Grid dimension and nodes per axis small enough for thousands of cases.
pub fn small_grid() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![(Just(1usize), 2usize..=16), (Just(2usize), 2usize..=8)]
}

pub fn grid(d: usize, n: usize) -> Arc<QuadratureGrid> {
    Arc::new(QuadratureGrid::new(d, n).unwrap())
}

/// Component-major soft assignment from raw positive draws.
pub fn soft_from_raw(g: &Arc<QuadratureGrid>, m: usize, raw: &[f64]) -> SoftAssignment {
    let len = g.len();
    let mut values = vec![0.0; m * len];
    for k in 0..len {
        let s: f64 = (0..m).map(|i| raw[(i * len + k) % raw.len()] + 1e-3).sum();
        for i in 0..m {
            values[i * len + k] = (raw[(i * len + k) % raw.len()] + 1e-3) / s;
        }
    }
    SoftAssignment::new(g.clone(), m, values).unwrap()
}

/// Minimum eigenvalue of the Mehler Gram matrix on the points.
pub fn mehler_min_eigenvalue(points: &[Vec<f64>], r: f64) -> f64 {
    let k = points.len();
    let gram = DMatrix::from_fn(k, k, |a, b| mehler_kernel(&points[a], &points[b], rho(r)).unwrap());
    SymmetricEigen::new(gram).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn mehler_case() -> impl Strategy<Value = (Vec<Vec<f64>>, f64)> {
    (1usize..=3, 1usize..=64, 0.0f64..0.95).prop_flat_map(|(d, k, r)| {
        (prop::collection::vec(prop::collection::vec(-4.0f64..4.0, d), k), Just(r))
    })
}

/// Largest nodewise gap between `T_{r2}(T_{r1} h)` and `T_{r1 r2} h` for a
/// cellwise-constant `h` on a one-dimensional grid. The outer operator is
/// applied by composite Gauss–Legendre over the Gaussian variable.
pub fn semigroup_gap(values: &[f64], r1: f64, r2: f64) -> f64 {
    let g = QuadratureGrid::new(1, values.len()).unwrap();
    let s2 = ((1.0 - r2) * (1.0 + r2)).sqrt();
    let rule = gauss_legendre(10);
    let (lo, width, panels) = (-9.0, 0.2, 90);
    let mut worst = 0.0f64;
    for &x in g.abscissae() {
        let mut comp = 0.0;
        for p in 0..panels {
            let mid = lo + width * (p as f64 + 0.5);
            for (t, w) in rule.0.iter().zip(&rule.1) {
                let z = mid + 0.5 * width * t;
                let inner = g.ou_pointwise(values, &[r2 * x + s2 * z], r1).0;
                comp += 0.5 * width * w * norm_pdf(z) * inner;
            }
        }
        let direct = g.ou_pointwise(values, &[x], r1 * r2).0;
        worst = worst.max((comp - direct).abs());
    }
    worst
}

pub fn semigroup_case() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
    (2usize..=12).prop_flat_map(|n| (prop::collection::vec(-1.0f64..1.0, n), 0.01f64..0.95, 0.01f64..0.95))
}

/// `(t C(f) + (1-t) C(g) - C(tf + (1-t)g), t(1-t) sum_i int (f_i - g_i) T (f_i - g_i))`.
pub fn convexity_sides(f: &SoftAssignment, g: &SoftAssignment, t: f64, r: f64) -> (f64, f64) {
    let obj = Objective::new(f.grid().clone(), rho(r)).unwrap();
    let mixed = f.mix(g, t).unwrap();
    let lhs = t * obj.value(f).unwrap() + (1.0 - t) * obj.value(g).unwrap() - obj.value(&mixed).unwrap();
    let len = f.len();
    let mut rhs = 0.0;
    for i in 0..f.m() {
        let diff: Vec<f64> = (0..len).map(|k| f.component(i)[k] - g.component(i)[k]).collect();
        rhs += obj.operator().bilinear(f.grid(), &diff, &diff);
    }
    (lhs, t * (1.0 - t) * rhs)
}

pub type SoftCase = (usize, usize, usize, Vec<f64>, Vec<f64>, f64, f64);

/// Grid shape, `m`, raw draws for two assignments, a mixing weight and `rho`.
pub fn soft_pair_case() -> impl Strategy<Value = SoftCase> {
    (small_grid(), 2usize..=4).prop_flat_map(|((d, n), m)| {
        let size = m * n.pow(d as u32);
        (
            Just(d),
            Just(n),
            Just(m),
            prop::collection::vec(0.0f64..1.0, size),
            prop::collection::vec(0.0f64..1.0, size),
            0.001f64..0.999,
            0.0f64..0.99,
        )
    })
}

pub fn quadratic_form(d: usize, n: usize, h: &[f64], r: f64) -> f64 {
    let g = grid(d, n);
    let op = GridOperator::new(&g, rho(r)).unwrap();
    op.bilinear(&g, h, h)
}

pub fn quadratic_case() -> impl Strategy<Value = (usize, usize, Vec<f64>, f64)> {
    small_grid().prop_flat_map(|(d, n)| (Just(d), Just(n), prop::collection::vec(-1.0f64..1.0, n.pow(d as u32)), 0.001f64..0.999))
}

/// Plurality and a random table rule, each before and after relabeling ballots by `perm`.
pub fn relabel_pairs(m: usize, n: usize, perm: &[usize], table_draws: &[usize]) -> [(VotingRule, VotingRule); 2] {
    let plural = VotingRule::plurality(m, n).unwrap();
    let size = m.pow(n as u32);
    let mut ballot = vec![0usize; n];
    let mut permuted_plural = Vec::with_capacity(size);
    let base_table: Vec<SimplexVector> = (0..size)
        .map(|c| {
            let j = table_draws[c % table_draws.len()] % (m + 1);
            if j == m {
                SimplexVector::uniform(m)
            } else {
                SimplexVector::basis(m, j)
            }
        })
        .collect();
    let mut permuted_table = Vec::with_capacity(size);
    for code in 0..size {
        plural.decode(code, &mut ballot);
        let moved: Vec<usize> = ballot.iter().map(|&b| perm[b] + 1).collect();
        permuted_plural.push(plural.evaluate(&moved).unwrap());
        let zero: Vec<usize> = moved.iter().map(|b| b - 1).collect();
        permuted_table.push(base_table[plural.encode(&zero)].clone());
    }
    [
        (plural, VotingRule::table(m, n, permuted_plural).unwrap()),
        (VotingRule::table(m, n, base_table).unwrap(), VotingRule::table(m, n, permuted_table).unwrap()),
    ]
}

pub fn relabel_case() -> impl Strategy<Value = (usize, usize, Vec<usize>, Vec<usize>, f64)> {
    prop_oneof![(Just(2usize), 1usize..=12), (Just(3usize), 1usize..=8), (Just(4usize), 1usize..=6)].prop_flat_map(|(m, n)| {
        (
            Just(m),
            Just(n),
            Just((0..m).collect::<Vec<usize>>()).prop_shuffle(),
            prop::collection::vec(0usize..64, 1..=64),
            0.0f64..0.99,
        )
    })
}

pub fn relabel_holds(m: usize, n: usize, perm: &[usize], draws: &[usize], r: f64) -> Result<(), TestCaseError> {
    for (a, b) in relabel_pairs(m, n, perm, draws) {
        let sa = discrete_stability_exact(&a, rho(r)).unwrap();
        let sb = discrete_stability_exact(&b, rho(r)).unwrap();
        prop_assert_eq!(sa.to_bits(), sb.to_bits(), "m={} n={} perm={:?}: {} vs {}", m, n, perm, sa, sb);
    }
    Ok(())
}

pub fn mehler_holds(points: &[Vec<f64>], r: f64) -> Result<(), TestCaseError> {
    let e = mehler_min_eigenvalue(points, r);
    prop_assert!(e >= -1e-8, "min eigenvalue {}", e);
    Ok(())
}

pub fn semigroup_holds(values: &[f64], r1: f64, r2: f64) -> Result<(), TestCaseError> {
    let gap = semigroup_gap(values, r1, r2);
    prop_assert!(gap <= 1e-8, "gap {} at r1={} r2={}", gap, r1, r2);
    Ok(())
}

pub fn convexity_holds(case: &SoftCase) -> Result<(), TestCaseError> {
    let (d, n, m, fa, ga, t, r) = case;
    let g = grid(*d, *n);
    let f = soft_from_raw(&g, *m, fa);
    let h = soft_from_raw(&g, *m, ga);
    let (lhs, rhs) = convexity_sides(&f, &h, *t, *r);
    prop_assert!(lhs >= -1e-9, "gap {}", lhs);
    prop_assert!((lhs - rhs).abs() <= 1e-12, "identity {} vs {}", lhs, rhs);
    Ok(())
}

pub fn quadratic_holds(d: usize, n: usize, h: &[f64], r: f64) -> Result<(), TestCaseError> {
    let q = quadratic_form(d, n, h, r);
    prop_assert!(q >= -1e-10, "form {}", q);
    Ok(())
}

pub fn rounding_holds(case: &SoftCase) -> Result<(), TestCaseError> {
    let (d, n, m, fa, _, _, _) = case;
    let g = grid(*d, *n);
    let f = soft_from_raw(&g, *m, fa);
    let p = round_to_partition(&f).unwrap();
    let back = SoftAssignment::from_partition(&p).unwrap();
    let labels = f.argmax_labels();
    for k in 0..g.len() {
        let node = back.node(k);
        prop_assert!(node.iter().all(|v| *v == 0.0 || *v == 1.0));
        prop_assert_eq!(node.iter().sum::<f64>(), 1.0);
        prop_assert_eq!(node[labels[k]], 1.0);
    }
    Ok(())
}

/// Analytic gradient against centered differences at sampled coordinates.
/// The objective is quadratic in the node values, so a large step is exact.
pub fn gradient_holds(case: &SoftCase, picks: &[Index]) -> Result<(), TestCaseError> {
    let (d, n, m, fa, _, _, r) = case;
    let g = grid(*d, *n);
    let f = soft_from_raw(&g, *m, fa);
    let obj = Objective::new(g.clone(), rho(*r)).unwrap();
    let grad = obj.gradient(&f).unwrap();
    let len = g.len();
    let value_of = |vals: &[f64]| -> f64 {
        (0..*m).map(|i| obj.operator().bilinear(&g, &vals[i * len..(i + 1) * len], &vals[i * len..(i + 1) * len])).sum()
    };
    let eligible: Vec<usize> = (0..m * len).filter(|&c| g.weight(c % len) >= 1e-6).collect();
    prop_assume!(!eligible.is_empty());
    let h = 0.5;
    for pick in picks {
        let c = eligible[pick.index(eligible.len())];
        let mut up = f.values().to_vec();
        up[c] += h;
        let mut down = f.values().to_vec();
        down[c] -= h;
        let fd = (value_of(&up) - value_of(&down)) / (2.0 * h);
        let rel = (fd - grad[c]).abs() / grad[c].abs();
        prop_assert!(rel <= 1e-5, "coordinate {}: fd {} vs {}", c, fd, grad[c]);
    }
    Ok(())
}

/// `S(Omega + s v)` against `S(Omega - s v)` for the three-cone partition.
/// The first derivative vanishes by symmetry; the odd part left over is the
/// cubic `cos(3 theta)` term, with coefficient below 0.14 for `rho` in `[0.05, 0.9]`.
pub fn translation_symmetry_holds(v: &[f64], s: f64, r: f64) -> Result<(), TestCaseError> {
    let p = Partition::simplex_cones(2, 3).unwrap();
    let plus: Vec<f64> = v.iter().map(|x| s * x).collect();
    let minus: Vec<f64> = v.iter().map(|x| -s * x).collect();
    let a = noise_stability(&p.translate(&plus).unwrap(), rho(r)).unwrap();
    let b = noise_stability(&p.translate(&minus).unwrap(), rho(r)).unwrap();
    let shift = s * v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 0.5 * shift.powi(3) + a.error_estimate + b.error_estimate + 1e-12;
    prop_assert!((a.value - b.value).abs() <= tol, "{} vs {} (tol {})", a.value, b.value, tol);
    Ok(())
}
