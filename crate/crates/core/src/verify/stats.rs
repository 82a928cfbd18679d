//! Replica-parallel Monte Carlo and Kolmogorov-Smirnov tests.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::rng::RngStream;

/// How replicas are run. Replica `i` always draws from stream `i` of `seed`,
/// and results are reduced in replica order, so the output does not depend on
/// `threads`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Exec {
    pub seed: u64,
    /// Worker threads; 0 or 1 runs on the calling thread.
    pub threads: usize,
}

impl Exec {
    pub fn sequential(seed: u64) -> Self {
        Self { seed, threads: 1 }
    }

    pub fn parallel(seed: u64, threads: usize) -> Self {
        Self { seed, threads }
    }

    /// The same thread setting with a seed derived from `label`.
    pub fn fork(&self, label: u64) -> Self {
        Self { seed: crate::rng::derive_seed(self.seed, label), threads: self.threads }
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(domain("an estimate needs at least two values"));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Self { mean, se: (var / n as f64).sqrt(), n })
    }

    /// `|mean - reference| <= k se`.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.se
    }
}

/// Runs `sampler` once per replica and returns the results in replica order.
pub fn mc_collect<T, F>(sampler: F, n: usize, exec: Exec) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream) -> Result<T> + Sync,
{
    let run = |i: usize| sampler(&mut RngStream::new(exec.seed, i as u64));
    if exec.threads <= 1 {
        return (0..n).map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exec.threads)
        .build()
        .map_err(|e| domain(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(run).collect())
}

/// Mean and standard error of a scalar sampler over `n >= 2` replicas.
pub fn mc_estimate<F>(sampler: F, n: usize, exec: Exec) -> Result<Estimate>
where
    F: Fn(&mut RngStream) -> Result<f64> + Sync,
{
    if n < 2 {
        return Err(domain("mc_estimate needs n >= 2"));
    }
    Estimate::from_values(&mc_collect(sampler, n, exec)?)
}

/// Column-wise estimates of a vector-valued sampler.
pub fn mc_estimate_many<F>(sampler: F, n: usize, exec: Exec) -> Result<Vec<Estimate>>
where
    F: Fn(&mut RngStream) -> Result<Vec<f64>> + Sync,
{
    let rows = mc_collect(sampler, n, exec)?;
    columns(&rows)?.iter().map(|c| Estimate::from_values(c)).collect()
}

/// Transposes equally long rows.
pub fn columns(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(domain("rows of unequal length"));
    }
    Ok((0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
}

/// Statistic and asymptotic p-value of a Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn p_value(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_survival((s + 0.12 + 0.11 / s) * d)
}

fn sorted(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| x.is_nan()) {
        return Err(domain("KS sample contains NaN"));
    }
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    Ok(s)
}

/// Two-sample KS test. Ties are handled by stepping over equal values in both
/// samples before comparing the empirical distribution functions.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("KS samples must be nonempty"));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult { statistic: d, p_value: p_value(d, na * nb / (na + nb)) })
}

/// One-sample KS test against a continuous distribution function.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(domain("KS sample must be nonempty"));
    }
    let s = sorted(sample)?;
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult { statistic: d, p_value: p_value(d, n) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specialfn::uniform01;

    #[test]
    fn constant_sampler() {
        let e = mc_estimate(|_| Ok(2.5), 10, Exec::sequential(1)).unwrap();
        assert_eq!((e.mean, e.se), (2.5, 0.0));
        assert!(mc_estimate(|_| Ok(1.0), 1, Exec::sequential(1)).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let f = |r: &mut RngStream| Ok(uniform01(r));
        let a = mc_estimate(f, 5000, Exec::sequential(3)).unwrap();
        let b = mc_estimate(f, 5000, Exec::parallel(3, 4)).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.se.to_bits(), b.se.to_bits());
    }

    #[test]
    fn ks_edge_cases() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let b: Vec<f64> = a.iter().map(|x| x + 1000.0).collect();
        assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, 1.0);
        assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-10);
    }

    #[test]
    fn kolmogorov_reference_points() {
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_survival(1.63) - 0.0098).abs() < 1e-3);
    }
}
