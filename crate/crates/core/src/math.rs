use std::f64::consts::PI;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log of a sum of exponentials. A single term is returned unchanged.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    match terms.len() {
        0 => f64::NEG_INFINITY,
        1 => terms[0],
        _ => {
            let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY || m == f64::INFINITY {
                return m;
            }
            m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
        }
    }
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Normalized weights proportional to `prior[i] * exp(log_lik[i])`.
///
/// When every prior weight is bitwise identical the prior is dropped, so a
/// filter carrying uniform weights produces exactly the same numbers as one
/// that carries none. Returns the normalized weights and the log of the
/// unnormalized sum (including the prior).
pub fn normalize_weighted(prior: Option<&[f64]>, log_lik: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = log_lik.len();
    if n == 0 {
        return None;
    }
    let uniform_prior = match prior {
        None => None,
        Some(p) => {
            debug_assert_eq!(p.len(), n);
            if p.iter().all(|w| w.to_bits() == p[0].to_bits()) {
                Some(p[0])
            } else {
                None
            }
        }
    };
    let logw: Vec<f64> = match (prior, uniform_prior) {
        (Some(p), None) => log_lik.iter().zip(p).map(|(l, w)| l + w.ln()).collect(),
        _ => log_lik.to_vec(),
    };
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    let mut log_sum = m + s.ln();
    if let Some(u) = uniform_prior {
        log_sum += u.ln();
    }
    Some((w, log_sum))
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = a % two_pi;
    if w <= -PI {
        w += two_pi;
    } else if w > PI {
        w -= two_pi;
    }
    w
}

pub fn normal_logpdf(residual: f64, std: f64) -> f64 {
    let u = residual / std;
    -0.5 * u * u - std.ln() - 0.5 * LN_2PI
}

/// Gauss-Legendre nodes and weights on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = mid - half * x;
        nodes[n - 1 - i] = mid + half * x;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    (nodes, weights)
}

pub fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Binomial coefficient as u128, exact for the sizes used here.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let f = pos - lo as f64;
    sorted[lo] * (1.0 - f) + sorted[hi] * f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_single_term_is_exact() {
        let x = -1234.567_891_234;
        assert_eq!(log_sum_exp(&[x]).to_bits(), x.to_bits());
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[0.0, 0.0]);
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn uniform_prior_is_ignored_bitwise() {
        let ll = [-3.0, -1.0, -2.5, -0.1];
        let (a, sa) = normalize_weighted(None, &ll).unwrap();
        let prior = [0.25; 4];
        let (b, sb) = normalize_weighted(Some(&prior), &ll).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!((sb - (sa + 0.25f64.ln())).abs() < 1e-14);
        let skew = [0.5, 0.25, 0.125, 0.125];
        let (c, _) = normalize_weighted(Some(&skew), &ll).unwrap();
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(normalize_weighted(None, &[f64::NEG_INFINITY]).is_none());
    }

    #[test]
    fn wrap_is_into_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_angle(0.02 - 2.0 * PI) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n, -1.0, 2.0);
            let deg = 2 * n - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = (2f64.powi(deg as i32 + 1) - (-1f64).powi(deg as i32 + 1)) / (deg as f64 + 1.0);
            assert!((q - exact).abs() < 1e-9 * exact.abs().max(1.0), "n={n} {q} {exact}");
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }
}
