//! Small numeric helpers shared across modules.

/// Logistic function, stable for large |t|.
#[inline]
pub fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        1.0 / (1.0 + e)
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(t)) without overflow.
#[inline]
pub fn log1pexp(t: f64) -> f64 {
    if t > 35.0 {
        t + (-t).exp()
    } else if t < -35.0 {
        t.exp()
    } else {
        t.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood contribution for linear predictor `eta` and
/// binary response `y`: y*eta - log(1+exp(eta)).
#[inline]
pub fn bernoulli_loglik_term(eta: f64, y: f64) -> f64 {
    y * eta - log1pexp(eta)
}

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n-1 denominator); `None` for fewer than 2 values.
pub fn sample_sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    let ss = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    Some((ss / (v.len() - 1) as f64).sqrt())
}

/// log of the binomial coefficient C(n, k), computed in log space.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let mut acc = 0.0;
    for i in 1..=k {
        acc += ((n - k + i) as f64).ln() - (i as f64).ln();
    }
    acc
}

/// Standard normal quantile via the Acklam rational approximation
/// (relative error below 1.2e-9 across (0,1)).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile requires p in (0,1)");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expit_matches_closed_form() {
        assert_eq!(expit(0.0), 0.5);
        assert!((expit(0.2) - 0.549833997312478).abs() < 1e-12);
        assert!(expit(800.0) <= 1.0 && expit(800.0) > 0.999);
        assert!(expit(-800.0) >= 0.0 && expit(-800.0) < 1e-12);
    }

    #[test]
    fn ln_choose_small_cases() {
        assert_eq!(ln_choose(5, 0), 0.0);
        assert!((ln_choose(5, 2) - 10f64.ln()).abs() < 1e-12);
        // C(66, 5) = 8_936_928
        assert!((ln_choose(66, 5) - 8_936_928f64.ln()).abs() < 1e-10);
    }

    /// Standard normal CDF by Simpson integration of the density; test oracle only.
    fn normal_cdf_oracle(z: f64) -> f64 {
        let steps = 40_000usize;
        let h = z / steps as f64;
        let dens = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = dens(0.0) + dens(z);
        for i in 1..steps {
            let t = i as f64 * h;
            acc += if i % 2 == 1 { 4.0 * dens(t) } else { 2.0 * dens(t) };
        }
        0.5 + acc * h / 3.0
    }

    #[test]
    fn quantile_matches_cdf_bisection() {
        for &p in &[0.5005, 0.6, 0.75, 0.9, 0.95, 0.975, 0.995, 0.9999] {
            let (mut lo, mut hi) = (0.0f64, 8.0f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if normal_cdf_oracle(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let z_ref = 0.5 * (lo + hi);
            assert!(
                (normal_quantile(p) - z_ref).abs() < 1e-6,
                "p={p}: {} vs {}",
                normal_quantile(p),
                z_ref
            );
            assert!((normal_quantile(1.0 - p) + z_ref).abs() < 1e-6);
        }
    }

    #[test]
    fn quantile_at_0975() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn sd_of_constant_is_zero() {
        assert_eq!(sample_sd(&[2.0, 2.0, 2.0]), Some(0.0));
        assert_eq!(sample_sd(&[1.0]), None);
    }
}
