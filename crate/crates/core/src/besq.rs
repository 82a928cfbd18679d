//! Squared Bessel processes.

use serde::Serialize;
use std::fmt::Write as _;

use crate::error::{check_finite, domain, Result};
use crate::rng::RngStream;
use crate::specialfn::{gamma, normal, poisson};

/// Default Euler step for negative dimension, relative to the initial value.
pub const DEFAULT_RELATIVE_STEP: f64 = 1e-4;

/// A squared Bessel path on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BesqPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub dimension: f64,
    pub absorption_time: Option<f64>,
}

impl BesqPath {
    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `time,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,value\n");
        for (t, v) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(s, "{t},{v}");
        }
        s
    }
}

/// Times `0, step, 2 step, ...` up to and including `horizon`.
pub fn time_grid(step: f64, horizon: f64) -> Result<Vec<f64>> {
    check_finite("time grid", &[step, horizon])?;
    if !(step > 0.0 && horizon > 0.0) {
        return Err(domain("step and horizon must be positive"));
    }
    if step > horizon * (1.0 + 1e-12) {
        return Err(domain(format!("step {step} exceeds horizon {horizon}")));
    }
    let n = (horizon / step - 1e-9).ceil() as usize;
    let mut grid: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    grid.push(horizon);
    Ok(grid)
}

/// Draws `Z_s` for `Z ~ BESQ_b(two_r)` started at `b`.
///
/// Uses the Poisson mixture `N ~ Poisson(b / 2s)`, `Z_s ~ Gamma(r + N, rate 1/2s)`.
pub fn besq_transition(b: f64, two_r: f64, s: f64, rng: &mut RngStream) -> Result<f64> {
    check_finite("besq_transition", &[b, two_r, s])?;
    if b < 0.0 || two_r < 0.0 || s <= 0.0 {
        return Err(domain(format!("besq_transition: b = {b}, 2r = {two_r}, s = {s}")));
    }
    let n = poisson(b / (2.0 * s), rng)?;
    gamma(0.5 * two_r + n as f64, 1.0 / (2.0 * s), rng)
}

/// Advances `BESQ(-2 alpha)` from `z > 0` for `duration` by Euler steps of at most
/// `substep`. Returns the end value, and the offset of the first zero if the
/// process was absorbed.
pub fn euler_negative_advance(
    z: f64,
    alpha: f64,
    duration: f64,
    substep: f64,
    rng: &mut RngStream,
) -> (f64, Option<f64>) {
    let mut z = z;
    let mut elapsed = 0.0;
    while elapsed < duration {
        let h = substep.min(duration - elapsed);
        if h <= 0.0 {
            break;
        }
        let next = z - 2.0 * alpha * h + 2.0 * (z * h).sqrt() * normal(rng);
        if next <= 0.0 {
            // Linear first passage between the two Euler values.
            let hit = elapsed + h * z / (z - next);
            return (0.0, Some(hit));
        }
        z = next;
        elapsed += h;
    }
    (z, None)
}

/// Euler path of `BESQ_b(-2 alpha)` absorbed at its first zero.
pub fn besq_negative_path(b: f64, alpha: f64, step: f64, horizon: f64, rng: &mut RngStream) -> Result<BesqPath> {
    check_finite("besq_negative_path", &[b, alpha])?;
    if b <= 0.0 {
        return Err(domain(format!("besq_negative_path: b = {b} must be positive")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("besq_negative_path: alpha = {alpha} outside (0, 1)")));
    }
    let grid = time_grid(step, horizon)?;
    let mut values = Vec::with_capacity(grid.len());
    values.push(b);
    let mut z = b;
    let mut absorption_time = None;
    for w in grid.windows(2) {
        if absorption_time.is_none() {
            let (next, hit) = euler_negative_advance(z, alpha, w[1] - w[0], step, rng);
            z = next;
            absorption_time = hit.map(|h| w[0] + h);
        }
        values.push(z);
    }
    Ok(BesqPath { grid, values, dimension: -2.0 * alpha, absorption_time })
}

/// First zero of an Euler path of `BESQ_b(-2 alpha)`, or `None` if it occurs
/// after `max_time`.
pub fn besq_negative_absorption_time(
    b: f64,
    alpha: f64,
    step: f64,
    max_time: f64,
    rng: &mut RngStream,
) -> Result<Option<f64>> {
    check_finite("besq_negative_absorption_time", &[b, alpha, step, max_time])?;
    if b <= 0.0 || !(alpha > 0.0 && alpha < 1.0) || step <= 0.0 {
        return Err(domain("besq_negative_absorption_time: invalid arguments"));
    }
    Ok(euler_negative_advance(b, alpha, max_time, step, rng).1)
}

/// Independent exact paths `BESQ_{b_i}(two_r_i)` on a common grid and their sum.
pub fn besq_additive_path(
    components: &[(f64, f64)],
    step: f64,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<(Vec<BesqPath>, BesqPath)> {
    let grid = time_grid(step, horizon)?;
    let mut paths = Vec::with_capacity(components.len());
    for &(b, two_r) in components {
        let mut values = Vec::with_capacity(grid.len());
        let mut z = b;
        values.push(z);
        for w in grid.windows(2) {
            z = besq_transition(z, two_r, w[1] - w[0], rng)?;
            values.push(z);
        }
        paths.push(BesqPath { grid: grid.clone(), values, dimension: two_r, absorption_time: None });
    }
    let mut sum = vec![0.0; grid.len()];
    for p in &paths {
        for (s, v) in sum.iter_mut().zip(&p.values) {
            *s += v;
        }
    }
    let dimension = components.iter().map(|c| c.1).sum();
    Ok((paths, BesqPath { grid, values: sum, dimension, absorption_time: None }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_absorbing_in_dimension_zero() {
        let mut rng = RngStream::new(1, 0);
        for _ in 0..100 {
            assert_eq!(besq_transition(0.0, 0.0, 1.0, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = RngStream::new(1, 0);
        assert!(besq_transition(-1.0, 1.0, 1.0, &mut rng).is_err());
        assert!(besq_transition(1.0, -1.0, 1.0, &mut rng).is_err());
        assert!(besq_transition(1.0, 1.0, 0.0, &mut rng).is_err());
        assert!(besq_negative_path(0.0, 0.5, 0.1, 1.0, &mut rng).is_err());
        assert!(time_grid(2.0, 1.0).is_err());
    }

    #[test]
    fn grid_covers_horizon() {
        let g = time_grid(0.1, 0.3).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(*g.last().unwrap(), 0.3);
        let g = time_grid(0.25, 0.6).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.6]);
    }

    #[test]
    fn negative_path_zero_after_absorption() {
        let mut rng = RngStream::new(2, 0);
        for _ in 0..20 {
            let p = besq_negative_path(0.1, 0.5, 1e-4, 2.0, &mut rng).unwrap();
            assert!(p.values.iter().all(|v| *v >= 0.0));
            if let Some(s) = p.absorption_time {
                for (t, v) in p.grid.iter().zip(&p.values) {
                    if *t >= s {
                        assert_eq!(*v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn additive_edge_cases() {
        let mut rng = RngStream::new(3, 0);
        let (paths, sum) = besq_additive_path(&[], 0.1, 1.0, &mut rng).unwrap();
        assert!(paths.is_empty());
        assert!(sum.values.iter().all(|v| *v == 0.0));

        let (_, single) = besq_additive_path(&[(1.0, 1.0)], 0.25, 0.75, &mut RngStream::new(5, 5)).unwrap();
        let mut rng = RngStream::new(5, 5);
        let mut z = 1.0;
        let mut direct = vec![z];
        for _ in 0..3 {
            z = besq_transition(z, 1.0, 0.25, &mut rng).unwrap();
            direct.push(z);
        }
        for (a, b) in single.values.iter().zip(&direct) {
            assert_eq!(a, b);
        }
    }
}
