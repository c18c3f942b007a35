//! Statistical checks: confidence intervals for means, Pearson chi-square
//! against a PMF, two-sample Kolmogorov–Smirnov, and bootstrap intervals for
//! medians.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::numeric::{chi_square_sf, RunningMoments};
use crate::{Error, Result};

/// Sample mean with its standard error `s/√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl ConfidenceEstimate {
    pub fn from_moments(m: &RunningMoments) -> Result<Self> {
        let n = m.count() as usize;
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        Ok(Self { mean: m.mean(), stderr: m.stderr(), n })
    }

    /// `|mean − value| ≤ sigmas · stderr`.
    pub fn covers(&self, value: f64, sigmas: f64) -> bool {
        (self.mean - value).abs() <= sigmas * self.stderr
    }
}

pub fn mean_ci(samples: &[f64]) -> Result<ConfidenceEstimate> {
    let mut m = RunningMoments::new();
    samples.iter().for_each(|&x| m.push(x));
    ConfidenceEstimate::from_moments(&m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution,
/// `P(K > λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series, fast for small λ
        let c = -PI * PI / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=20).map(|k| ((2 * k - 1) as f64).powi(2) * c).map(f64::exp).sum::<f64>()
            * (2.0 * PI).sqrt()
            / lambda;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS statistic `sup |F_a − F_b|` with the asymptotic p-value
/// `Q_K(√(nm/(n+m)) D)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    const MIN: usize = 25;
    let shortest = a.len().min(b.len());
    if shortest < MIN {
        return Err(Error::InsufficientData { needed: MIN, got: shortest });
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < n && a[i] == x {
            i += 1;
        }
        while j < m && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n + m) as f64;
    Ok(KsResult { statistic: d, p_value: kolmogorov_sf(ne.sqrt() * d) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
}

/// Pearson chi-square of `counts[k]` against `pmf(k)`.
///
/// Consecutive bins are pooled until each group expects at least
/// `min_expected`; the probability beyond the last bin joins the last group.
pub fn chi_square_pmf(counts: &[u64], pmf: impl Fn(usize) -> f64, min_expected: f64) -> Result<ChiSquareResult> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let total = total as f64;
    let probs: Vec<f64> = (0..counts.len()).map(&pmf).collect();
    let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);

    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (k, (&c, &p)) in counts.iter().zip(&probs).enumerate() {
        obs += c as f64;
        exp += total * p;
        if k + 1 == counts.len() {
            exp += total * tail;
        }
        if exp >= min_expected {
            groups.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if obs > 0.0 || exp > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => groups.push((obs, exp)),
        }
    }
    if groups.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: groups.len() });
    }
    let statistic: f64 = groups.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = groups.len() - 1;
    Ok(ChiSquareResult { statistic, p_value: chi_square_sf(statistic, dof as f64), dof })
}

/// Median; the mean of the two central values for even lengths.
pub fn median(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut v = samples.to_vec();
    Ok(median_in_place(&mut v))
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let (_, &mut hi, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Percentile bootstrap interval for the median at coverage `level`.
pub fn bootstrap_median_ci<R: Rng + ?Sized>(samples: &[f64], level: f64, resamples: usize, rng: &mut R) -> Result<(f64, f64)> {
    if samples.len() < 2 || resamples < 2 {
        return Err(Error::InsufficientData { needed: 2, got: samples.len().min(resamples) });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config("confidence level must lie in (0, 1)"));
    }
    let n = samples.len();
    let mut buf = alloc::vec![0.0; n];
    let mut medians = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = samples[rng.random_range(0..n)];
        }
        medians.push(median_in_place(&mut buf));
    }
    medians.sort_unstable_by(f64::total_cmp);
    let alpha = 0.5 * (1.0 - level);
    let at = |q: f64| medians[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    Ok((at(alpha), at(1.0 - alpha)))
}
