//! Small statistical utilities: two-sample Kolmogorov-Smirnov test, sample
//! quantiles, bootstrap standard errors and log-gamma.

use rand::Rng;

/// Two-sample Kolmogorov-Smirnov test result.
#[derive(Debug, Clone, Copy)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample KS test with the asymptotic p-value (Stephens' small-sample
/// correction of the Kolmogorov distribution).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsOutcome {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|x, y| x.total_cmp(y));
    xb.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let mut ia = 0usize;
    let mut ib = 0usize;
    let mut d: f64 = 0.0;
    while ia < xa.len() && ib < xb.len() {
        let va = xa[ia];
        let vb = xb[ib];
        if va <= vb {
            ia += 1;
        }
        if vb <= va {
            ib += 1;
        }
        d = d.max((ia as f64 / na - ib as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    KsOutcome { statistic: d, p_value: kolmogorov_survival(lambda) }
}

/// Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 * sum.abs().max(1e-300) {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Linear-interpolation sample quantile on a sorted slice (type-7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|x, y| x.total_cmp(y));
    quantile_sorted(&sorted, q)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sample_variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Bootstrap standard error of a sample quantile.
pub fn bootstrap_quantile_se<R: Rng>(values: &[f64], q: f64, reps: usize, rng: &mut R) -> f64 {
    let n = values.len();
    let mut estimates = Vec::with_capacity(reps);
    let mut resample = vec![0.0; n];
    for _ in 0..reps {
        for slot in resample.iter_mut() {
            *slot = values[rng.gen_range(0..n)];
        }
        estimates.push(quantile(&resample, q));
    }
    sample_variance(&estimates).sqrt()
}

/// Half-width c of the central exact interval of Binomial(trials, 1/2):
/// the smallest c with P(|X - trials/2| <= c) >= level. A count passes the
/// interval check iff |count - trials/2| <= c.
pub fn binomial_central_halfwidth(trials: u64, level: f64) -> f64 {
    let center = trials as f64 / 2.0;
    // log pmf via log-gamma, accumulated outward from the center
    let log_pmf = |k: u64| -> f64 {
        ln_gamma(trials as f64 + 1.0)
            - ln_gamma(k as f64 + 1.0)
            - ln_gamma((trials - k) as f64 + 1.0)
            - trials as f64 * std::f64::consts::LN_2
    };
    let mut mass = 0.0;
    let mut c = 0.0;
    let start = center.floor() as u64;
    let mut lo = start;
    let mut hi = if center.fract() > 0.0 { start + 1 } else { start };
    mass += log_pmf(lo).exp();
    if hi != lo {
        mass += log_pmf(hi).exp();
    }
    while mass < level {
        if lo == 0 && hi == trials {
            break;
        }
        if lo > 0 {
            lo -= 1;
            mass += log_pmf(lo).exp();
        }
        if hi < trials {
            hi += 1;
            mass += log_pmf(hi).exp();
        }
        c = (center - lo as f64).max(hi as f64 - center);
    }
    c
}

/// Lanczos approximation of ln Gamma(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// ln of the multivariate gamma function Gamma_d(a).
pub fn ln_multivariate_gamma(d: usize, a: f64) -> f64 {
    let d_f = d as f64;
    d_f * (d_f - 1.0) / 4.0 * std::f64::consts::PI.ln()
        + (0..d).map(|i| ln_gamma(a - i as f64 / 2.0)).sum::<f64>()
}
