use libm::erfc;

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`normal_cdf`] by bracketing bisection followed by Newton
/// polishing. Works on the lower tail and mirrors for `p > 0.5` so that
/// tiny upper-tail probabilities keep their precision.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} not in (0, 1)")));
    }
    if p > 0.5 {
        return Ok(-inverse_normal_cdf(1.0 - p)?);
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (-40.0_f64, 0.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-3 {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let step = (normal_cdf(x) - p) / normal_pdf(x);
        let next = (x - step).clamp(lo, hi);
        let done = (next - x).abs() <= 1e-12 * (1.0 + x.abs());
        x = next;
        if done {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Composite Simpson rule on the density from 0 to |x|.
    fn quadrature_cdf(x: f64) -> f64 {
        let n = 20_000;
        let h = x.abs() / n as f64;
        let mut acc = normal_pdf(0.0) + normal_pdf(x.abs());
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * normal_pdf(i as f64 * h);
        }
        let half = acc * h / 3.0;
        if x >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    #[test]
    fn matches_quadrature() {
        for &x in &[-1.959964, -3.2905, -0.3, 0.0, 0.7, 2.5] {
            let err = (normal_cdf(x) - quadrature_cdf(x)).abs();
            assert!(err < 1e-12, "x = {x}, err = {err:e}");
        }
        assert!((normal_cdf(-1.959964) - 0.025).abs() < 1e-7);
    }

    #[test]
    fn tails() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((1.0 - normal_cdf(9.0)).abs() < 1e-12);
        assert!(normal_cdf(-9.0) < 1e-12);
        assert_eq!(normal_cdf(f64::INFINITY), 1.0);
    }

    #[test]
    fn inverse_known_quantiles() {
        assert!((inverse_normal_cdf(0.025).unwrap() + 1.959963984540054).abs() < 1e-10);
        assert!((inverse_normal_cdf(0.0005).unwrap() + 3.2905267314919255).abs() < 1e-10);
        assert!(inverse_normal_cdf(0.0).is_err());
        assert!(inverse_normal_cdf(1.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetry(x in -12.0f64..12.0) {
            prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn inverse_roundtrip(log_p in -18.42f64..-1e-8) {
            let p = log_p.exp();
            for q in [p, 1.0 - p] {
                if q > 0.0 && q < 1.0 && q <= 1.0 - 1e-8 {
                    let x = inverse_normal_cdf(q).unwrap();
                    prop_assert!((normal_cdf(x) - q).abs() <= 1e-9 * q.min(1.0 - q).max(1e-300) + 1e-15);
                }
            }
        }
    }
}
