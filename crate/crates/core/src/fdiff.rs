//! Jacobi and Wright-Fisher diffusions.

use std::fmt::Write as _;

use crate::besq::{besq_transition, time_grid};
use crate::depoisson::{build_time_change, depoissonize, TimeChange};
use crate::error::{check_finite, domain, Result};
use crate::mpoly::MPoly;
use crate::path::{GridPath, MassChain};
use crate::rng::RngStream;
use crate::specialfn::normal;

/// A diffusion path on a time grid, possibly stopped or absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct SdePath<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub absorption_time: Option<f64>,
}

impl SdePath<f64> {
    pub fn final_value(&self) -> f64 {
        *self.states.last().expect("paths are never empty")
    }

    /// `time,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,value\n");
        for (t, v) in self.times.iter().zip(&self.states) {
            let _ = writeln!(s, "{t},{v}");
        }
        s
    }
}

impl SdePath<Vec<f64>> {
    /// `time,w1,w2,...` rows.
    pub fn to_csv(&self) -> String {
        let dim = self.states.first().map_or(0, Vec::len);
        let mut s = String::from("time");
        for i in 1..=dim {
            let _ = write!(s, ",w{i}");
        }
        s.push('\n');
        for (t, w) in self.times.iter().zip(&self.states) {
            let _ = write!(s, "{t}");
            for x in w {
                let _ = write!(s, ",{x}");
            }
            s.push('\n');
        }
        s
    }
}

/// Euler path of `dX = 2 sqrt(X(1-X)) dB + 2(r - (r + r') X) dt`, clipped to
/// `[0, 1]`, absorbed at 0 if `r <= 0` and at 1 if `r' <= 0`.
pub fn jacobi_path(b: f64, r: f64, r_prime: f64, step: f64, horizon: f64, rng: &mut RngStream) -> Result<SdePath<f64>> {
    check_finite("jacobi_path", &[b, r, r_prime])?;
    if !(0.0..=1.0).contains(&b) {
        return Err(domain(format!("jacobi_path: start {b} outside [0, 1]")));
    }
    let times = time_grid(step, horizon)?;
    let absorb_low = r <= 0.0;
    let absorb_high = r_prime <= 0.0;
    let mut x = b;
    let mut absorption_time = if (absorb_low && b == 0.0) || (absorb_high && b == 1.0) { Some(0.0) } else { None };
    let mut states = Vec::with_capacity(times.len());
    states.push(x);
    for w in times.windows(2) {
        let h = w[1] - w[0];
        if absorption_time.is_none() {
            let next = x + 2.0 * (x * (1.0 - x)).max(0.0).sqrt() * h.sqrt() * normal(rng) + 2.0 * (r - (r + r_prime) * x) * h;
            if absorb_low && next <= 0.0 {
                absorption_time = Some(w[0] + h * x / (x - next));
                x = 0.0;
            } else if absorb_high && next >= 1.0 {
                absorption_time = Some(w[0] + h * (1.0 - x) / (next - x));
                x = 1.0;
            } else {
                x = next.clamp(0.0, 1.0);
            }
        }
        states.push(x);
    }
    Ok(SdePath { times, states, absorption_time })
}

/// Euler path of the Wright-Fisher diffusion on the simplex with parameters `r`,
/// renormalised after every step and stopped when a coordinate with negative
/// parameter reaches zero.
pub fn wf_path(b: &[f64], r: &[f64], step: f64, horizon: f64, rng: &mut RngStream) -> Result<SdePath<Vec<f64>>> {
    check_finite("wf_path", b)?;
    check_finite("wf_path", r)?;
    if b.len() < 2 || b.len() != r.len() {
        return Err(domain("wf_path: need matching dimensions of at least 2"));
    }
    if b.iter().any(|x| *x < 0.0) || (b.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(domain("wf_path: start must lie in the simplex"));
    }
    let times = time_grid(step, horizon)?;
    let r_plus: f64 = r.iter().sum();
    let dim = b.len();
    let mut w = b.to_vec();
    let mut absorption_time = if b.iter().zip(r).any(|(x, ri)| *x == 0.0 && *ri < 0.0) { Some(0.0) } else { None };
    let mut states = Vec::with_capacity(times.len());
    states.push(w.clone());
    let mut xi = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    for win in times.windows(2) {
        let h = win[1] - win[0];
        if absorption_time.is_none() {
            let sh = h.sqrt();
            let mut common = 0.0;
            for (i, z) in xi.iter_mut().enumerate() {
                *z = normal(rng);
                common += w[i].sqrt() * *z;
            }
            let mut first_hit: Option<f64> = None;
            for i in 0..dim {
                let noise = 2.0 * (w[i].sqrt() * xi[i] - w[i] * common) * sh;
                next[i] = w[i] + noise + 2.0 * (r[i] - r_plus * w[i]) * h;
                if r[i] < 0.0 && next[i] <= 0.0 {
                    let frac = w[i] / (w[i] - next[i]);
                    first_hit = Some(first_hit.map_or(frac, |f| f.min(frac)));
                }
            }
            for (i, x) in next.iter_mut().enumerate() {
                if r[i] < 0.0 && *x <= 0.0 {
                    *x = 0.0;
                }
                *x = x.max(0.0);
            }
            let total: f64 = next.iter().sum();
            for (wi, x) in w.iter_mut().zip(&next) {
                *wi = x / total;
            }
            absorption_time = first_hit.map(|f| win[0] + h * f);
        }
        states.push(w.clone());
    }
    Ok(SdePath { times, states, absorption_time })
}

/// Independent squared Bessel coordinates with exact transitions.
#[derive(Debug, Clone)]
pub struct BesqVectorChain {
    dims: Vec<f64>,
    current: Vec<f64>,
    previous: Vec<f64>,
}

impl BesqVectorChain {
    /// Starting values and dimensions `2 r_i >= 0`.
    pub fn new(start: Vec<f64>, dims: Vec<f64>) -> Result<Self> {
        if start.len() != dims.len() || start.iter().any(|x| *x < 0.0) || dims.iter().any(|d| *d < 0.0) {
            return Err(domain("squared Bessel vector: invalid start or dimensions"));
        }
        Ok(Self { dims, previous: start.clone(), current: start })
    }
}

impl MassChain for BesqVectorChain {
    type State = Vec<f64>;

    fn state(&self) -> &Vec<f64> {
        &self.current
    }

    fn previous_state(&self) -> &Vec<f64> {
        &self.previous
    }

    fn advance(&mut self, dt: f64, rng: &mut RngStream) -> Result<()> {
        let mut next = Vec::with_capacity(self.current.len());
        for (z, d) in self.current.iter().zip(&self.dims) {
            next.push(besq_transition(*z, *d, dt, rng)?);
        }
        self.previous = std::mem::replace(&mut self.current, next);
        Ok(())
    }
}

/// The time-changed ratio construction and its ingredients.
#[derive(Debug, Clone)]
pub struct WarrenYorConstruction {
    pub path: SdePath<f64>,
    pub source: GridPath<Vec<f64>>,
    pub time_change: TimeChange,
}

/// Jacobi path as `Z / (Z + Z')` for independent `Z ~ BESQ_b(2r)` and
/// `Z' ~ BESQ_{1-b}(2r')`, run on the clock `int dv / (Z + Z')`.
pub fn warren_yor_construction(
    b: f64,
    r: f64,
    r_prime: f64,
    step: f64,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<WarrenYorConstruction> {
    check_finite("warren_yor_jacobi", &[b, r, r_prime])?;
    if !(0.0..=1.0).contains(&b) || r < 0.0 || r_prime < 0.0 {
        return Err(domain("warren_yor_jacobi: need b in [0, 1] and r, r' >= 0"));
    }
    let t_grid = time_grid(step, horizon)?;
    let mut chain = BesqVectorChain::new(vec![b, 1.0 - b], vec![2.0 * r, 2.0 * r_prime])?;
    let mut times = vec![0.0];
    let mut states = vec![chain.state().clone()];
    let mut clock = 0.0;
    let mut mass = 1.0;
    while clock <= horizon {
        chain.advance(step, rng)?;
        let m = chain.total_mass();
        times.push(times.len() as f64 * step);
        states.push(chain.state().clone());
        if m <= 0.0 {
            break;
        }
        clock += 0.5 * step * (1.0 / mass + 1.0 / m);
        mass = m;
    }
    let source = GridPath::from_states(times, states)?;
    let time_change = build_time_change(&source)?;
    let usable: Vec<f64> = t_grid.into_iter().filter(|t| *t < time_change.horizon_t || *t == 0.0).collect();
    let normalized = depoissonize(&source, &time_change, &usable)?;
    let values = normalized.states.iter().map(|w| w[0]).collect();
    Ok(WarrenYorConstruction {
        path: SdePath { times: usable, states: values, absorption_time: None },
        source,
        time_change,
    })
}

pub fn warren_yor_jacobi(b: f64, r: f64, r_prime: f64, step: f64, horizon: f64, rng: &mut RngStream) -> Result<SdePath<f64>> {
    Ok(warren_yor_construction(b, r, r_prime, step, horizon, rng)?.path)
}

/// `2x(1-x) f''(x) + 2(r - (r + r') x) f'(x)` for `f` given by ascending
/// coefficients.
pub fn apply_jacobi_gen(poly_coeffs: &[f64], r: f64, r_prime: f64, x: f64) -> f64 {
    let d1: Vec<f64> = poly_coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
    let d2: Vec<f64> = d1.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
    let horner = |c: &[f64]| c.iter().rev().fold(0.0, |acc, a| acc * x + a);
    2.0 * x * (1.0 - x) * horner(&d2) + 2.0 * (r - (r + r_prime) * x) * horner(&d1)
}

/// Wright-Fisher generator with parameters `r` applied to `prod_i w_i^{e_i}`:
/// `2 sum_i w_i d_i^2 - 2 sum_{i,j} w_i w_j d_i d_j - 2 sum_i (r_+ w_i - r_i) d_i`.
pub fn apply_wf_gen(exponents: &[u32], r: &[f64], w: &[f64]) -> Result<f64> {
    if exponents.len() != r.len() || r.len() != w.len() {
        return Err(domain("apply_wf_gen: dimensions disagree"));
    }
    let r_plus: f64 = r.iter().sum();
    let f = MPoly::monomial(1.0, exponents);
    Ok(f.apply_second_order(
        w,
        |i| 2.0 * w[i],
        |i, j| -2.0 * w[i] * w[j],
        |i| -2.0 * (r_plus * w[i] - r[i]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jacobi_generator_examples() {
        assert_relative_eq!(apply_jacobi_gen(&[0.0, 1.0], 0.3, 0.4, 0.2), 2.0 * (0.3 - 0.7 * 0.2));
        assert_relative_eq!(apply_jacobi_gen(&[0.0, 0.0, 1.0], -0.5, 1.0, 0.5), -0.5, epsilon = 1e-15);
        assert_relative_eq!(apply_jacobi_gen(&[0.0, 0.0, 1.0], -0.5, 1.0, 0.3), 0.06, epsilon = 1e-15);
    }

    #[test]
    fn wf_generator_vanishes_on_zero_coordinate() {
        let v = apply_wf_gen(&[0, 2], &[-0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
        let v = apply_wf_gen(&[1, 3, 0], &[0.2, 0.5, 1.0], &[0.4, 0.0, 0.6]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn wf_reduces_to_jacobi() {
        for m in 1..5u32 {
            for &x in &[0.1, 0.45, 0.9] {
                let wf = apply_wf_gen(&[m, 0], &[0.3, 1.2], &[x, 1.0 - x]).unwrap();
                let mut coeffs = vec![0.0; m as usize + 1];
                coeffs[m as usize] = 1.0;
                let jac = apply_jacobi_gen(&coeffs, 0.3, 1.2, x);
                assert_relative_eq!(wf, jac, max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn jacobi_absorbed_at_start() {
        let p = jacobi_path(0.0, -0.5, 1.0, 0.01, 0.2, &mut RngStream::new(1, 0)).unwrap();
        assert!(p.states.iter().all(|x| *x == 0.0));
        assert_eq!(p.absorption_time, Some(0.0));
    }

    #[test]
    fn wf_stays_on_simplex() {
        let p = wf_path(&[0.3, 0.3, 0.4], &[0.5, 0.2, 1.0], 1e-3, 0.2, &mut RngStream::new(2, 0)).unwrap();
        for w in &p.states {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn warren_yor_degenerate_second_coordinate() {
        let p = warren_yor_jacobi(1.0, 0.5, 0.0, 1e-3, 0.1, &mut RngStream::new(3, 0)).unwrap();
        assert!(p.states.iter().all(|x| *x == 1.0));
    }

    #[test]
    fn warren_yor_clock_is_the_shared_time_change() {
        let c = warren_yor_construction(0.5, 0.5, 0.5, 1e-3, 0.05, &mut RngStream::new(4, 0)).unwrap();
        assert_eq!(build_time_change(&c.source).unwrap(), c.time_change);
        assert!(c.time_change.horizon_t > 0.05);
    }
}
