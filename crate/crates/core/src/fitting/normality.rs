//! One-sample Kolmogorov–Smirnov test against a normal fitted to the sample.

use serde::Serialize;

use super::FitError;
use crate::integrator::normal_cdf;

pub const KS_ALPHA: f64 = 0.05;
pub const KS_MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KsOptions {
    /// Use the Dallal–Wilkinson approximation of the Lilliefors null
    /// distribution instead of the plain asymptotic Kolmogorov one.
    pub lilliefors: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
    pub n: usize,
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form, fast for small lambda.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let sum: f64 = (0..20).map(|j| (c * ((2 * j + 1) as f64).powi(2)).exp()).sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0)
    } else {
        let sum: f64 = (1..=100)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum();
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

fn dallal_wilkinson(d: f64, n: usize) -> f64 {
    let (d, n) = if n > 100 { (d * (n as f64 / 100.0).powf(0.49), 100.0) } else { (d, n as f64) };
    let p = (-7.01256 * d * d * (n + 2.78019) + 2.99587 * d * (n + 2.78019).sqrt() - 0.122119
        + 0.974598 / n.sqrt()
        + 1.67997 / n)
        .exp();
    p.clamp(0.0, 1.0)
}

pub fn ks_normality(sample: &[f64], opts: KsOptions) -> Result<KsResult, FitError> {
    let n = sample.len();
    if n < KS_MIN_SAMPLES {
        return Err(FitError::TooFewSamples { needed: KS_MIN_SAMPLES, got: n });
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let sd = (sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
    if !(sd > 0.0) {
        return Err(FitError::ZeroVariance);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf((v - mean) / sd);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let p_value = if opts.lilliefors { dallal_wilkinson(statistic, n) } else { kolmogorov_sf(nf.sqrt() * statistic) };
    Ok(KsResult { statistic, p_value, pass: p_value >= KS_ALPHA, n })
}
