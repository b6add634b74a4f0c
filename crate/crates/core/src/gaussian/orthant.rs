//! Bivariate normal orthant probabilities.

use crate::special::{gauss_legendre, norm_cdf};
use std::f64::consts::PI;
use std::sync::OnceLock;

const TWO_PI: f64 = 2.0 * PI;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        // 32-point rule mapped to [0, 1]
        let (x, w) = gauss_legendre(32);
        (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|v| 0.5 * v).collect())
    })
}

/// `P(X > h, Y > k)` for a standard bivariate normal with correlation `r`, `|r| < 1`.
fn upper(h: f64, k: f64, r: f64) -> f64 {
    let (xs, ws) = rule();
    let hk = h * k;
    if r.abs() <= 0.925 {
        let mut bvn = 0.0;
        if r != 0.0 {
            let hs = 0.5 * (h * h + k * k);
            let asr = r.asin();
            for (t, w) in xs.iter().zip(ws) {
                let sn = (asr * t).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
            bvn *= asr / TWO_PI;
        }
        return bvn + norm_cdf(-h) * norm_cdf(-k);
    }
    let (mut k, mut hk) = (k, hk);
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let mut bvn = 0.0;
    let a_s = (1.0 - r) * (1.0 + r);
    let a = a_s.sqrt();
    let b_s = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    let asr = -0.5 * (b_s / a_s + hk);
    if asr > -100.0 {
        bvn = a * asr.exp() * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
    }
    if -hk < 100.0 {
        let b = b_s.sqrt();
        bvn -= (-0.5 * hk).exp() * SQRT_2PI * norm_cdf(-b / a) * b * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
    }
    for (t, w) in xs.iter().zip(ws) {
        let x = a * t;
        let x_s = x * x;
        let r_s = (1.0 - x_s).sqrt();
        let asr = -0.5 * (b_s / x_s + hk);
        if asr > -100.0 {
            bvn += a * w * asr.exp() * ((-hk * (1.0 - r_s) / (2.0 * (1.0 + r_s))).exp() / r_s - (1.0 + c * x_s * (1.0 + d * x_s)));
        }
    }
    bvn *= -1.0 / TWO_PI;
    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        let mut out = -bvn;
        if k > h {
            out += if h < 0.0 { norm_cdf(k) - norm_cdf(h) } else { norm_cdf(-h) - norm_cdf(-k) };
        }
        out.max(0.0)
    }
}

/// `P(X <= a, Y <= b)` for a standard bivariate normal pair with correlation `r`.
///
/// Infinite limits are allowed. The caller guarantees `|r| < 1`.
pub(crate) fn orthant(a: f64, b: f64, r: f64) -> f64 {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return 0.0;
    }
    if a == f64::INFINITY {
        return norm_cdf(b);
    }
    if b == f64::INFINITY {
        return norm_cdf(a);
    }
    upper(-a, -b, r).clamp(0.0, 1.0)
}

/// Partial derivative of `orthant(a, b, r)` with respect to `a`.
pub(crate) fn orthant_da(a: f64, b: f64, r: f64) -> f64 {
    if !a.is_finite() || b == f64::NEG_INFINITY {
        return 0.0;
    }
    let s = ((1.0 - r) * (1.0 + r)).sqrt();
    crate::special::norm_pdf(a) * norm_cdf((b - r * a) / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::integrate;

    fn quad_oracle(a: f64, b: f64, r: f64) -> f64 {
        // P(X <= a, Y <= b) = int_{-inf}^{a} phi(x) Phi((b - r x)/s) dx
        let s = ((1.0 - r) * (1.0 + r)).sqrt();
        let rule = gauss_legendre(20);
        integrate(
            |x| crate::special::norm_pdf(x) * norm_cdf((b - r * x) / s),
            -40.0,
            a,
            4000,
            &rule,
        )
    }

    #[test]
    fn independence() {
        for &(a, b) in &[(0.3, -1.2), (2.0, 0.5), (-3.0, -0.1)] {
            assert!((orthant(a, b, 0.0) - norm_cdf(a) * norm_cdf(b)).abs() < 1e-15);
        }
    }

    #[test]
    fn sheppard() {
        let expect = 0.25 + 0.3f64.asin() / TWO_PI;
        assert!((orthant(0.0, 0.0, 0.3) - expect).abs() < 1e-14);
        assert!((orthant(0.0, 0.0, -0.95) - (0.25 + (-0.95f64).asin() / TWO_PI)).abs() < 1e-13);
    }

    #[test]
    fn near_comonotone() {
        // P(X <= 1.5 < Y) is still about 2.3e-3 at this correlation.
        let v = orthant(1.5, 1.5, 0.999);
        assert!((v - 0.930_882_284_854_364).abs() < 1e-10);
        assert!(v < norm_cdf(1.5));
        assert!((orthant(1.5, 1.5, 0.999_999_99) - norm_cdf(1.5)).abs() < 1e-4);
    }

    #[test]
    fn matches_quadrature() {
        for &r in &[-0.99, -0.93, -0.5, 0.1, 0.7, 0.92, 0.93, 0.99, 0.9995] {
            for &(a, b) in &[(0.0, 0.0), (1.0, -0.5), (-2.0, 1.5), (2.5, 2.0), (-1.0, -1.3)] {
                let got = orthant(a, b, r);
                let want = quad_oracle(a, b, r);
                assert!((got - want).abs() < 1e-10, "r={r} a={a} b={b} got={got} want={want}");
            }
        }
    }

    #[test]
    fn derivative_matches_difference() {
        let (a, b, r) = (0.4, -0.2, 0.5);
        let h = 1e-5;
        let fd = (orthant(a + h, b, r) - orthant(a - h, b, r)) / (2.0 * h);
        assert!((fd - orthant_da(a, b, r)).abs() < 1e-8);
    }

    #[test]
    fn infinite_limits() {
        assert_eq!(orthant(f64::NEG_INFINITY, 1.0, 0.2), 0.0);
        assert!((orthant(f64::INFINITY, 1.0, 0.2) - norm_cdf(1.0)).abs() < 1e-16);
    }
}
