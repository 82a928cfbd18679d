//! Exact transition kernels of the self-similar superprocess and its
//! interval-partition analogue, and grid paths built from them.

mod interval;
mod negative;

pub use interval::{ip_kernel_step, ip_kernel_step_with, IpChain};
pub use negative::{sssp_negative_theta, NegativeThetaChain, NegativeThetaState, DEFAULT_EPOCH_CAP};

use serde::Serialize;

use crate::error::{check_finite, domain, Result};
use crate::path::{simulate_grid, GridPath, MassChain};
use crate::pd::stick_breaking_until;
use crate::rng::RngStream;
use crate::specialfn::{exp1, gamma, poisson, uniform01, zero_truncated_poisson, KeepProbability};
use crate::types::{resolve_collisions, Atom, AtomMeasure, Dust};

/// Diffusion parameters with `0 < alpha < 1` and `theta > -alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    alpha: f64,
    theta: f64,
}

impl Params {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        check_finite("params", &[alpha, theta])?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain(format!("alpha = {alpha} outside (0, 1)")));
        }
        if !(theta + alpha > 0.0) {
            return Err(domain(format!("theta = {theta} must exceed -alpha = {}", -alpha)));
        }
        Ok(Self { alpha, theta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn require_nonnegative_theta(&self) -> Result<()> {
        if self.theta < 0.0 {
            return Err(domain(format!(
                "theta = {} is negative; use the negative-theta construction",
                self.theta
            )));
        }
        Ok(())
    }
}

/// How far undrawn Poisson-Dirichlet mass is broken into atoms before a state
/// is handed out.
///
/// For atomic measures every remaining piece of dust is at most `tail` times
/// the total mass, or `max_sticks` atoms were drawn from it; the dust stays
/// part of the state, so this only limits what observers see. Interval
/// partitions have no dust: there a cloud of blocks is broken until its
/// remainder is at most `tail * 2s`, and the remainder becomes one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolution {
    pub max_sticks: usize,
    pub tail: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Self { max_sticks: 10_000, tail: 1e-4 }
    }
}

impl Resolution {
    /// Remainders close to the stick-breaking limit.
    pub fn fine() -> Self {
        Self { max_sticks: 100_000, tail: 1e-8 }
    }

    /// Leaves all dust undrawn.
    pub fn none() -> Self {
        Self { max_sticks: 0, tail: 0.0 }
    }

    /// Default for interval partitions.
    pub fn interval() -> Self {
        Self { max_sticks: 10_000, tail: 1e-2 }
    }

    /// Applies the measure rule to `mu`.
    pub fn apply(&self, mu: &mut AtomMeasure, rng: &mut RngStream) -> Result<()> {
        let limit = self.tail * mu.total_mass();
        mu.resolve(limit, self.max_sticks, rng)
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(domain(format!("{name} = {x} must be positive and finite")));
    }
    Ok(())
}

/// Draws `L` with Laplace transform
/// `((r+l)/r)^a (exp(b r^2/(r+l)) - 1) / (exp(b r) - 1)`, as the mixture
/// `K ~ ZTPoisson(b r)`, `L ~ Gamma(K - a, rate r)`.
pub fn sample_l(b: f64, r: f64, alpha: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("b", b)?;
    check_positive("r", r)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    draw_l(b, r, alpha, rng)
}

#[inline]
fn draw_l(b: f64, r: f64, alpha: f64, rng: &mut RngStream) -> Result<f64> {
    let k = zero_truncated_poisson(b * r, rng)?;
    gamma(k as f64 - alpha, r, rng)
}

/// Block masses of `g * PDIP(alpha, theta)` in stick order, remainder last.
pub(crate) fn push_cloud_blocks(
    out: &mut Vec<f64>,
    g: f64,
    cloud: Params,
    r: f64,
    res: &Resolution,
    rng: &mut RngStream,
) -> Result<()> {
    if g <= 0.0 {
        return Ok(());
    }
    let sticks = stick_breaking_until(cloud, res.tail / (r * g), res.max_sticks, rng)?;
    out.extend(sticks.weights.iter().map(|w| g * w));
    let rest = g * sticks.residual;
    if rest > 0.0 {
        out.push(rest);
    }
    Ok(())
}

/// Hazards above this are decided by one uniform instead of the Poisson line.
const DIRECT_HAZARD: f64 = 0.5;

/// A unit-rate Poisson process on a half line along which hazards are laid out
/// end to end: an item survives if a point falls in its stretch, which has
/// probability `1 - exp(-h)`, and a non-surviving item costs no random draw.
struct HazardLine {
    next_point: f64,
    line: f64,
}

impl HazardLine {
    fn new(rng: &mut RngStream) -> Self {
        Self { next_point: exp1(rng), line: 0.0 }
    }

    /// Survival for an item of hazard `h`.
    fn survives(&mut self, h: f64, rng: &mut RngStream) -> bool {
        if h > DIRECT_HAZARD {
            return uniform01(rng) < -(-h).exp_m1();
        }
        let end = self.line + h;
        let hit = self.next_point < end;
        if hit {
            self.next_point = end + exp1(rng);
        }
        self.line = end;
        hit
    }
}

/// Surviving atoms of `dust` when each atom of mass `w` survives with
/// probability `1 - exp(-w r)`.
///
/// Survival means catching a point of a Poisson process of rate `r` on the
/// mass, so `Poisson(mass r)` points are dropped uniformly on the dust. A point
/// lands in an atom already drawn with probability equal to their share of the
/// mass; otherwise the atom it hits is a size-biased pick from the rest, which
/// is the next stick. Only atoms that survive are ever drawn.
fn thin_dust(dust: Dust, r: f64, rng: &mut RngStream, out: &mut Vec<Atom>) -> Result<()> {
    let mut d = dust;
    let points = poisson(dust.mass * r, rng)?;
    let mut drawn = 0.0;
    for _ in 0..points {
        if uniform01(rng) * dust.mass < drawn {
            continue;
        }
        let piece = d.break_stick(rng)?;
        drawn += piece;
        if piece > 0.0 {
            out.push(Atom::new(uniform01(rng), piece));
        }
    }
    Ok(())
}

/// Independent survival of each mass `b_i` with probability `1 - exp(-b_i r)`.
pub(crate) fn select_survivors(
    masses: impl Iterator<Item = f64>,
    r: f64,
    rng: &mut RngStream,
    survivors: &mut Vec<usize>,
) {
    let mut line = HazardLine::new(rng);
    for (i, b) in masses.enumerate() {
        if line.survives(b * r, rng) {
            survivors.push(i);
        }
    }
}

/// Surviving atoms of `mu` (its dust drawn lazily) over a step with `r = 1/(2s)`.
fn surviving_atoms(mu: &AtomMeasure, r: f64, rng: &mut RngStream) -> Result<Vec<Atom>> {
    let mut line = HazardLine::new(rng);
    let mut out = Vec::new();
    for a in mu.atoms() {
        if line.survives(a.mass * r, rng) {
            out.push(*a);
        }
    }
    for d in mu.dust() {
        thin_dust(*d, r, rng, &mut out)?;
    }
    Ok(out)
}

/// Descendants of a surviving atom: the special atom (kept at `u` or moved)
/// plus a `Gamma(alpha, r) * PDRM(alpha, alpha)` cloud, left as dust.
fn push_descendants(
    atoms: &mut Vec<Atom>,
    dust: &mut Vec<Dust>,
    b: f64,
    u: f64,
    r: f64,
    keep: &KeepProbability,
    rng: &mut RngStream,
) -> Result<()> {
    let alpha = keep.alpha();
    let c = draw_l(b, r, alpha, rng)?;
    if c > 0.0 {
        let keep = keep.eval(b, r, c)?;
        let loc = if uniform01(rng) < keep { u } else { uniform01(rng) };
        atoms.push(Atom::new(loc, c));
    }
    let g = gamma(alpha, r, rng)?;
    if g > 0.0 {
        dust.push(Dust { mass: g, alpha, theta: alpha });
    }
    Ok(())
}

/// One draw from the offspring law of an atom `b delta(u)` over a step with
/// `r = 1/(2s)`: the zero measure with probability `exp(-b r)`.
pub fn sample_q(b: f64, u: f64, r: f64, alpha: f64, rng: &mut RngStream) -> Result<AtomMeasure> {
    sample_q_with(b, u, r, alpha, &Resolution::default(), rng)
}

pub fn sample_q_with(
    b: f64,
    u: f64,
    r: f64,
    alpha: f64,
    res: &Resolution,
    rng: &mut RngStream,
) -> Result<AtomMeasure> {
    check_positive("b", b)?;
    check_positive("r", r)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(domain(format!("location {u} outside [0, 1]")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    if uniform01(rng) >= -(-b * r).exp_m1() {
        return Ok(AtomMeasure::zero());
    }
    let (mut atoms, mut dust) = (Vec::new(), Vec::new());
    push_descendants(&mut atoms, &mut dust, b, u, r, &KeepProbability::new(alpha)?, rng)?;
    let mut q = AtomMeasure::from_parts_unchecked(atoms, dust);
    res.apply(&mut q, rng)?;
    Ok(q)
}

/// One exact draw from the transition kernel over time `s` (requires
/// `theta >= 0`), with dust resolved by the default [`Resolution`].
pub fn kernel_step(mu: &AtomMeasure, s: f64, params: Params, rng: &mut RngStream) -> Result<AtomMeasure> {
    kernel_step_with(mu, s, params, &Resolution::default(), rng)
}

pub fn kernel_step_with(
    mu: &AtomMeasure,
    s: f64,
    params: Params,
    res: &Resolution,
    rng: &mut RngStream,
) -> Result<AtomMeasure> {
    let mut out = kernel_step_lazy(mu, s, params, rng)?;
    res.apply(&mut out, rng)?;
    Ok(out)
}

/// The kernel step with all new clouds left as dust.
pub fn kernel_step_lazy(mu: &AtomMeasure, s: f64, params: Params, rng: &mut RngStream) -> Result<AtomMeasure> {
    check_positive("s", s)?;
    params.require_nonnegative_theta()?;
    let r = 0.5 / s;
    if !r.is_finite() {
        // A step below the float range leaves the state unchanged.
        return Ok(mu.clone());
    }
    let survivors = surviving_atoms(mu, r, rng)?;
    let mut atoms = Vec::with_capacity(survivors.len());
    let mut dust = Vec::with_capacity(survivors.len() + 1);
    let g0 = gamma(params.theta, r, rng)?;
    if g0 > 0.0 {
        dust.push(Dust { mass: g0, alpha: params.alpha, theta: params.theta });
    }
    let keep = KeepProbability::new(params.alpha)?;
    for a in survivors {
        push_descendants(&mut atoms, &mut dust, a.mass, a.location, r, &keep, rng)?;
    }
    resolve_collisions(&mut atoms, rng);
    Ok(AtomMeasure::from_parts_unchecked(atoms, dust))
}

/// The superprocess as a Markov chain with exact transitions (`theta >= 0`).
/// Dust is drawn only when [`MassChain::resolve`] is called.
#[derive(Debug, Clone)]
pub struct SsspChain {
    params: Params,
    resolution: Resolution,
    current: AtomMeasure,
    previous: AtomMeasure,
}

impl SsspChain {
    pub fn new(mu0: AtomMeasure, params: Params) -> Result<Self> {
        Self::with_resolution(mu0, params, Resolution::default())
    }

    pub fn with_resolution(mu0: AtomMeasure, params: Params, resolution: Resolution) -> Result<Self> {
        params.require_nonnegative_theta()?;
        Ok(Self { params, resolution, previous: mu0.clone(), current: mu0 })
    }

    /// Mutable access to the current state, e.g. to draw more of its dust.
    pub fn state_mut(&mut self) -> &mut AtomMeasure {
        &mut self.current
    }
}

impl MassChain for SsspChain {
    type State = AtomMeasure;

    fn state(&self) -> &AtomMeasure {
        &self.current
    }

    fn previous_state(&self) -> &AtomMeasure {
        &self.previous
    }

    fn advance(&mut self, dt: f64, rng: &mut RngStream) -> Result<()> {
        let next = if self.current.is_empty() && self.params.theta == 0.0 {
            AtomMeasure::zero()
        } else {
            kernel_step_lazy(&self.current, dt, self.params, rng)?
        };
        self.previous = std::mem::replace(&mut self.current, next);
        Ok(())
    }

    fn resolve(&mut self, rng: &mut RngStream) -> Result<()> {
        self.resolution.apply(&mut self.current, rng)
    }
}

/// States at `0, step, ..., horizon`, each obtained from the previous by an
/// exact kernel draw.
pub fn sssp_grid_path(
    mu0: &AtomMeasure,
    step: f64,
    horizon: f64,
    params: Params,
    rng: &mut RngStream,
) -> Result<GridPath<AtomMeasure>> {
    let mut chain = SsspChain::new(mu0.clone(), params)?;
    simulate_grid(&mut chain, step, horizon, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(Params::new(0.5, 0.5).is_ok());
        assert!(Params::new(0.5, -0.49).is_ok());
        assert!(Params::new(0.5, -0.5).is_err());
        assert!(Params::new(0.0, 1.0).is_err());
        assert!(Params::new(1.0, 1.0).is_err());
    }

    #[test]
    fn zero_measure_stays_zero_without_immigration() {
        let p = Params::new(0.5, 0.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..50 {
            assert!(kernel_step(&AtomMeasure::zero(), 0.3, p, &mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn negative_theta_rejected_by_kernel() {
        let p = Params::new(0.5, -0.25).unwrap();
        let mu = AtomMeasure::dirac(0.5, 1.0).unwrap();
        assert!(kernel_step(&mu, 0.1, p, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn outputs_satisfy_measure_invariants() {
        let p = Params::new(0.5, 0.5).unwrap();
        let mut mu = AtomMeasure::dirac(0.5, 1.0).unwrap();
        let mut rng = RngStream::new(9, 0);
        for _ in 0..30 {
            mu = kernel_step(&mu, 0.01, p, &mut rng).unwrap();
            mu.validate().unwrap();
        }
    }

    #[test]
    fn q_has_one_special_atom_at_most_at_u() {
        let mut rng = RngStream::new(2, 0);
        for _ in 0..200 {
            let q = sample_q(1.0, 0.25, 1.0, 0.5, &mut rng).unwrap();
            assert!(q.atoms().iter().filter(|a| a.location == 0.25).count() <= 1);
        }
    }

    #[test]
    fn survivor_selection_small_and_large_hazards() {
        let mut rng = RngStream::new(3, 0);
        let masses = [0.01, 5.0, 0.02, 0.0, 100.0];
        let mut hits = [0usize; 5];
        let n = 40_000;
        for _ in 0..n {
            let mut s = Vec::new();
            select_survivors(masses.iter().copied(), 1.0, &mut rng, &mut s);
            for i in s {
                hits[i] += 1;
            }
        }
        for (i, &b) in masses.iter().enumerate() {
            let p: f64 = 1.0 - (-b).exp();
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-9);
            let f = hits[i] as f64 / n as f64;
            assert!((f - p).abs() <= 4.0 * se, "atom {i}: {f} vs {p}");
        }
    }

    #[test]
    fn grid_path_lengths() {
        let p = Params::new(0.5, 0.5).unwrap();
        let mu = AtomMeasure::dirac(0.5, 1.0).unwrap();
        let path = sssp_grid_path(&mu, 0.1, 0.5, p, &mut RngStream::new(4, 0)).unwrap();
        assert_eq!(path.len(), 6);
        assert!(path.clock.windows(2).all(|w| w[1] >= w[0]));
    }
}
