//! Special functions and elementary random variates.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use crate::error::{check_finite, domain, Error, Result};
use crate::rng::RngStream;

const SERIES_REL_TOL: f64 = 1e-16;
const SERIES_MAX_TERMS: usize = 500;
const ASYMPTOTIC_MIN_Z: f64 = 30.0;

/// `log |Gamma(x)|` together with the sign of `Gamma(x)`.
pub fn log_gamma(x: f64) -> Result<(f64, f64)> {
    check_finite("log_gamma", &[x])?;
    if x > 0.0 {
        return Ok((ln_gamma(x), 1.0));
    }
    if x == x.floor() {
        return Err(domain(format!("log_gamma: pole at {x}")));
    }
    // Reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x).
    let s = (PI * x).sin();
    let value = PI.ln() - s.abs().ln() - ln_gamma(1.0 - x);
    Ok((value, s.signum()))
}

/// `1 / Gamma(x)`, which is zero at the poles.
fn recip_gamma(x: f64) -> f64 {
    match log_gamma(x) {
        Ok((lg, sign)) => sign * (-lg).exp(),
        Err(_) => 0.0,
    }
}

/// Sum of the ascending series `sum_{m >= m0} (z/2)^(2m+v) / (m! Gamma(m+v+1))`
/// multiplied by `exp(-shift)`. Requires `m0 + v + 1 > 0` so that every term is
/// positive and the term ratio recurrence applies.
fn positive_series(v: f64, z: f64, m0: usize, shift: f64) -> f64 {
    let half = 0.5 * z;
    let m0f = m0 as f64;
    let log_first = (2.0 * m0f + v) * half.ln() - ln_gamma(m0f + 1.0) - ln_gamma(m0f + v + 1.0);
    let mut term = (log_first - shift).exp();
    let mut sum = term;
    let q = half * half;
    let mut m = m0f;
    for _ in 0..SERIES_MAX_TERMS {
        term *= q / ((m + 1.0) * (m + v + 1.0));
        m += 1.0;
        sum += term;
        // Terms decrease once m exceeds z/2, after which the tail is bounded
        // by a geometric series.
        if term < SERIES_REL_TOL * sum && m > half {
            break;
        }
    }
    sum
}

/// `exp(-shift) * I_v(z)` from the ascending series.
fn series_i(v: f64, z: f64, shift: f64) -> f64 {
    // Leading terms with m + v + 1 <= 0 carry signed (or vanishing) reciprocal
    // gammas; the remainder is a positive series.
    let first_positive = if v + 1.0 > 0.0 { 0 } else { (-(v + 1.0)).floor() as usize + 1 };
    let half = 0.5 * z;
    let mut head = 0.0;
    for m in 0..first_positive {
        let mf = m as f64;
        let rg = recip_gamma(mf + v + 1.0);
        if rg != 0.0 {
            let log_mag = (2.0 * mf + v) * half.ln() - ln_gamma(mf + 1.0) - shift;
            head += rg * log_mag.exp();
        }
    }
    head + positive_series(v, z, first_positive, shift)
}

/// `sqrt(2 pi z) exp(-z) I_v(z)` from the large-argument expansion.
fn asymptotic_core(v: f64, z: f64) -> f64 {
    let mu = 4.0 * v * v;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= -(mu - odd * odd) / (kf * 8.0 * z);
        if term.abs() >= prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn use_asymptotic(v: f64, z: f64) -> bool {
    z > ASYMPTOTIC_MIN_Z && z > v * v
}

fn check_bessel_args(v: f64, z: f64) -> Result<()> {
    check_finite("bessel_i", &[v, z])?;
    if z <= 0.0 {
        return Err(domain(format!("bessel_i: z must be positive, got {z}")));
    }
    Ok(())
}

/// Modified Bessel function of the first kind `I_v(z)` for real order `v`.
pub fn bessel_i(v: f64, z: f64) -> Result<f64> {
    check_bessel_args(v, z)?;
    if use_asymptotic(v, z) {
        Ok(z.exp() / (2.0 * PI * z).sqrt() * asymptotic_core(v, z))
    } else {
        Ok(series_i(v, z, 0.0))
    }
}

/// Exponentially scaled `exp(-z) I_v(z)`, finite for large `z`.
pub fn bessel_i_scaled(v: f64, z: f64) -> Result<f64> {
    check_bessel_args(v, z)?;
    if use_asymptotic(v, z) {
        Ok(asymptotic_core(v, z) / (2.0 * PI * z).sqrt())
    } else {
        Ok(series_i(v, z, z))
    }
}

/// Which power of the argument multiplies the correction term in the
/// denominator of the keep probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeepNormalization {
    /// `alpha (z/2)^(-1-alpha) / Gamma(1-alpha)`: cancels the leading series term
    /// of `I_{-1-alpha}(z)`.
    HalfArgument,
    /// `alpha z^(-1-alpha) / Gamma(1-alpha)`.
    FullArgument,
}

/// Keep probability `I_{1+a}(z) / (I_{-1-a}(z) + correction)` with
/// `z = 2 r sqrt(b c)`, evaluated without range checks.
pub fn keep_probability_raw(b: f64, r: f64, c: f64, alpha: f64, norm: KeepNormalization) -> Result<f64> {
    check_keep_args(b, r, c)?;
    let keep = KeepProbability::new(alpha)?;
    let z = 2.0 * r * (b * c).sqrt();
    match norm {
        KeepNormalization::HalfArgument => Ok(keep.half_argument(z)),
        KeepNormalization::FullArgument => {
            let corr = (keep.log_corr_scale - (1.0 + alpha) * z.ln() - z).exp();
            let num = bessel_i_scaled(1.0 + alpha, z)?;
            let den = bessel_i_scaled(-1.0 - alpha, z)? + corr;
            Ok(num / den)
        }
    }
}

fn check_keep_args(b: f64, r: f64, c: f64) -> Result<()> {
    check_finite("keep probability", &[b, r, c])?;
    if b <= 0.0 || r <= 0.0 || c <= 0.0 {
        return Err(domain("keep probability: b, r and c must be positive"));
    }
    Ok(())
}

/// The keep probability for one `alpha`, with the gamma-function constants
/// computed once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeepProbability {
    alpha: f64,
    /// `log(alpha / Gamma(1 - alpha))`.
    log_corr_scale: f64,
    /// `log(Gamma(1 - alpha) / Gamma(2 + alpha))`.
    log_lead_ratio: f64,
}

impl KeepProbability {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain(format!("keep probability: alpha = {alpha} outside (0, 1)")));
        }
        let lg = ln_gamma(1.0 - alpha);
        Ok(Self { alpha, log_corr_scale: alpha.ln() - lg, log_lead_ratio: lg - ln_gamma(2.0 + alpha) })
    }

    /// Probability that a surviving atom of initial mass `b` keeps its
    /// location given its new mass `c`, with `r = 1/(2s)`.
    pub fn eval(&self, b: f64, r: f64, c: f64) -> Result<f64> {
        check_keep_args(b, r, c)?;
        let z = 2.0 * r * (b * c).sqrt();
        let p = self.half_argument(z);
        if !(-1e-9..=1.0 + 1e-9).contains(&p) || !p.is_finite() {
            return Err(Error::Normalization { value: p, z });
        }
        Ok(p.clamp(0.0, 1.0))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn half_argument(&self, z: f64) -> f64 {
        let alpha = self.alpha;
        if z == 0.0 {
            // b c underflowed; the ratio vanishes like z^(2 alpha).
            return 0.0;
        }
        let half = 0.5 * z;
        if use_asymptotic(1.0 + alpha, z) {
            let num = asymptotic_core(1.0 + alpha, z);
            let corr = (self.log_corr_scale - (1.0 + alpha) * half.ln() - z).exp() * (2.0 * PI * z).sqrt();
            let den = asymptotic_core(-1.0 - alpha, z) + corr;
            return num / den;
        }
        // Adding the correction removes the m = 0 term of the series for
        // I_{-1-alpha}, leaving a sum of positive terms. Both series are
        // divided by their leading terms.
        let q = half * half;
        let (mut t, mut num, mut m) = (1.0, 1.0, 0.0);
        for _ in 0..SERIES_MAX_TERMS {
            t *= q / ((m + 1.0) * (m + 2.0 + alpha));
            m += 1.0;
            num += t;
            if t < SERIES_REL_TOL * num && m > half {
                break;
            }
        }
        let (mut u, mut den, mut m) = (1.0, 1.0, 1.0);
        for _ in 0..SERIES_MAX_TERMS {
            u *= q / ((m + 1.0) * (m - alpha));
            m += 1.0;
            den += u;
            if u < SERIES_REL_TOL * den && m > half {
                break;
            }
        }
        (2.0 * alpha * half.ln() + self.log_lead_ratio).exp() * num / den
    }
}

/// Probability that a surviving atom of initial mass `b` keeps its location
/// given its new mass `c`, with `r = 1/(2s)`.
pub fn p_keep(b: f64, r: f64, c: f64, alpha: f64) -> Result<f64> {
    KeepProbability::new(alpha)?.eval(b, r, c)
}

/// Elementary laws supported by [`sample_standard`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardLaw {
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    Poisson { mean: f64 },
    ZeroTruncatedPoisson { mean: f64 },
    Uniform01,
}

/// Draws one variate. Counts are returned as integral `f64` values.
pub fn sample_standard(law: StandardLaw, rng: &mut RngStream) -> Result<f64> {
    match law {
        StandardLaw::Gamma { shape, rate } => gamma(shape, rate, rng),
        StandardLaw::Beta { a, b } => beta(a, b, rng),
        StandardLaw::Poisson { mean } => poisson(mean, rng).map(|k| k as f64),
        StandardLaw::ZeroTruncatedPoisson { mean } => zero_truncated_poisson(mean, rng).map(|k| k as f64),
        StandardLaw::Uniform01 => Ok(uniform01(rng)),
    }
}

/// Uniform on `[0, 1)`.
#[inline]
pub fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Standard exponential.
#[inline]
pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::Exp1.sample(rng)
}

/// Standard normal.
#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

/// Gamma with the given shape and rate. Shape 0 is the point mass at 0.
pub fn gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape >= 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
        return Err(domain(format!("gamma: shape {shape}, rate {rate}")));
    }
    if shape == 0.0 {
        return Ok(0.0);
    }
    let law = Gamma::new(shape, 1.0 / rate).map_err(|e| domain(format!("gamma: {e}")))?;
    Ok(law.sample(rng))
}

pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(domain(format!("beta: a {a}, b {b}")));
    }
    let law = Beta::new(a, b).map_err(|e| domain(format!("beta: {e}")))?;
    Ok(law.sample(rng))
}

/// Poisson with the given mean. Mean 0 returns 0.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(domain(format!("poisson: mean {mean}")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let law = Poisson::new(mean).map_err(|e| domain(format!("poisson: {e}")))?;
    Ok(law.sample(rng) as u64)
}

/// Poisson conditioned to be at least one.
pub fn zero_truncated_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(domain(format!("zero_truncated_poisson: mean {mean}")));
    }
    if mean >= 1.0 {
        // Acceptance probability 1 - exp(-mean) >= 0.63.
        let law = Poisson::new(mean).map_err(|e| domain(format!("poisson: {e}")))?;
        loop {
            let k = law.sample(rng) as u64;
            if k >= 1 {
                return Ok(k);
            }
        }
    }
    // Inversion: P(K = k) = mean^k / (k! (e^mean - 1)).
    let mut u = uniform01(rng) * mean.exp_m1();
    let mut k = 1u64;
    let mut p = mean;
    loop {
        if u < p || k > 1000 {
            return Ok(k);
        }
        u -= p;
        k += 1;
        p *= mean / k as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bessel_half_orders_closed_form() {
        for &z in &[0.1, 1.0, 5.0, 20.0, 29.0, 35.0, 60.0] {
            let pref = (2.0 / (PI * z)).sqrt();
            assert_relative_eq!(bessel_i(0.5, z).unwrap(), pref * z.sinh(), max_relative = 1e-12);
            assert_relative_eq!(bessel_i(-0.5, z).unwrap(), pref * z.cosh(), max_relative = 1e-12);
        }
        assert_relative_eq!(bessel_i(0.5, 1.0).unwrap(), 0.937674888245489, max_relative = 1e-12);
        assert_relative_eq!(bessel_i(-0.5, 1.0).unwrap(), 1.231200214592967, max_relative = 1e-12);
    }

    #[test]
    fn bessel_small_argument() {
        assert_relative_eq!(bessel_i(0.0, 1e-12).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn bessel_integer_order_reflection() {
        // I_{-n} = I_n for integer n.
        for &z in &[0.3, 2.0, 12.0] {
            assert_relative_eq!(bessel_i(-2.0, z).unwrap(), bessel_i(2.0, z).unwrap(), max_relative = 1e-12);
            assert_relative_eq!(bessel_i(-1.0, z).unwrap(), bessel_i(1.0, z).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn bessel_series_and_asymptotic_agree_near_switch() {
        for &v in &[-1.75, -1.25, 0.0, 1.5] {
            let s = series_i(v, 30.5, 30.5);
            let a = asymptotic_core(v, 30.5) / (2.0 * PI * 30.5).sqrt();
            assert_relative_eq!(s, a, max_relative = 1e-12);
        }
    }

    #[test]
    fn bessel_rejects_bad_args() {
        assert!(bessel_i(0.5, 0.0).is_err());
        assert!(bessel_i(0.5, -1.0).is_err());
        assert!(bessel_i(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn log_gamma_values() {
        let (v, s) = log_gamma(1.0).unwrap();
        assert!(v.abs() < 1e-15 && s == 1.0);
        assert_relative_eq!(log_gamma(0.5).unwrap().0, 0.5723649429247001, max_relative = 1e-14);
        let (v, s) = log_gamma(-0.5).unwrap();
        assert_relative_eq!(v, (2.0 * PI.sqrt()).ln(), max_relative = 1e-13);
        assert_eq!(s, -1.0);
        assert_eq!(log_gamma(-1.5).unwrap().1, 1.0);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-3.0).is_err());
    }

    #[test]
    fn log_gamma_factorials() {
        let mut f = 1.0f64;
        for n in 1..30u32 {
            f *= n as f64;
            assert_relative_eq!(log_gamma(n as f64 + 1.0).unwrap().0, f.ln(), max_relative = 1e-13);
        }
    }

    #[test]
    fn keep_probability_limits() {
        // Small argument: vanishes linearly in z.
        let p = p_keep(1e-4, 0.5, 1e-4, 0.5).unwrap();
        assert!(p < 1e-4, "{p}");
        let p_smaller = p_keep(1e-6, 0.5, 1e-6, 0.5).unwrap();
        assert_relative_eq!(p / p_smaller, 100.0, max_relative = 1e-3);
        // Large argument: bounded, close to one.
        let z50 = p_keep(25.0, 1.0, 25.0, 0.5).unwrap();
        assert!((0.9..=1.0).contains(&z50), "{z50}");
    }

    #[test]
    fn keep_probability_continuous_across_switch() {
        let below = p_keep(1.0, 1.0, 224.9, 0.5).unwrap();
        let above = p_keep(1.0, 1.0, 225.1, 0.5).unwrap();
        assert!((below - above).abs() < 1e-4);
    }

    #[test]
    fn gamma_shape_zero_is_zero() {
        let mut rng = RngStream::new(1, 0);
        assert_eq!(sample_standard(StandardLaw::Gamma { shape: 0.0, rate: 1.0 }, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn invalid_laws_rejected() {
        let mut rng = RngStream::new(1, 0);
        assert!(sample_standard(StandardLaw::Beta { a: 0.0, b: 1.0 }, &mut rng).is_err());
        assert!(sample_standard(StandardLaw::ZeroTruncatedPoisson { mean: 0.0 }, &mut rng).is_err());
        assert!(sample_standard(StandardLaw::Gamma { shape: 1.0, rate: 0.0 }, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let law = StandardLaw::ZeroTruncatedPoisson { mean: 0.7 };
        let a: Vec<f64> = {
            let mut r = RngStream::new(3, 9);
            (0..50).map(|_| sample_standard(law, &mut r).unwrap()).collect()
        };
        let b: Vec<f64> = {
            let mut r = RngStream::new(3, 9);
            (0..50).map(|_| sample_standard(law, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
    }
}
