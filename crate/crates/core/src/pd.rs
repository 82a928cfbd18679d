//! Poisson-Dirichlet samplers by stick breaking.

use crate::error::Result;
use crate::kernels::Params;
use crate::rng::RngStream;
use crate::specialfn::{beta, uniform01};
use crate::types::{resolve_collisions, Atom, AtomMeasure, Dust, IntervalPartition, RankedVector};

pub const DEFAULT_STICKS: usize = 10_000;

/// Stick lengths in size-biased order and the unbroken remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct Sticks {
    pub weights: Vec<f64>,
    pub residual: f64,
}

/// Breaks sticks `W_j ~ Beta(1 - alpha, theta + j alpha)` until `max_sticks`
/// pieces exist or the remainder drops to `stop_residual`.
pub fn stick_breaking_until(
    params: Params,
    stop_residual: f64,
    max_sticks: usize,
    rng: &mut RngStream,
) -> Result<Sticks> {
    let (alpha, theta) = (params.alpha(), params.theta());
    let mut weights = Vec::with_capacity(max_sticks.min(256));
    let mut residual = 1.0;
    for j in 1..=max_sticks {
        if residual <= stop_residual {
            break;
        }
        let w = beta(1.0 - alpha, theta + j as f64 * alpha, rng)?;
        let piece = residual * w;
        if piece > 0.0 {
            weights.push(piece);
        }
        residual *= 1.0 - w;
    }
    Ok(Sticks { weights, residual })
}

/// Exactly `n_sticks` breaks.
pub fn stick_breaking(params: Params, n_sticks: usize, rng: &mut RngStream) -> Result<Sticks> {
    stick_breaking_until(params, 0.0, n_sticks, rng)
}

/// Ranked PD(alpha, theta) masses; the truncation remainder is the defect.
pub fn sample_pd(alpha: f64, theta: f64, n_sticks: usize, rng: &mut RngStream) -> Result<RankedVector> {
    let sticks = stick_breaking(Params::new(alpha, theta)?, n_sticks, rng)?;
    Ok(RankedVector::from_masses(sticks.weights, sticks.residual))
}

/// PD(alpha, theta) masses at independent uniform locations.
pub fn sample_pdrm(alpha: f64, theta: f64, n_sticks: usize, rng: &mut RngStream) -> Result<AtomMeasure> {
    let sticks = stick_breaking(Params::new(alpha, theta)?, n_sticks, rng)?;
    Ok(place_uniformly(&sticks.weights, 1.0, rng))
}

/// PDRM(alpha, theta) with atoms drawn until the undrawn remainder is at most
/// `max_remainder` (or `max_sticks` atoms exist). The remainder is kept as
/// [`Dust`], so the measure has exactly the PDRM law and total mass one.
pub fn sample_pdrm_lazy(params: Params, max_remainder: f64, max_sticks: usize, rng: &mut RngStream) -> Result<AtomMeasure> {
    let dust = Dust { mass: 1.0, alpha: params.alpha(), theta: params.theta() };
    let mut mu = AtomMeasure::from_parts_unchecked(Vec::new(), vec![dust]);
    mu.resolve(max_remainder, max_sticks, rng)?;
    Ok(mu)
}

/// PD(alpha, theta) masses as blocks in size-biased order.
pub fn sample_pdip_masses(
    alpha: f64,
    theta: f64,
    n_sticks: usize,
    rng: &mut RngStream,
) -> Result<IntervalPartition> {
    let sticks = stick_breaking(Params::new(alpha, theta)?, n_sticks, rng)?;
    Ok(IntervalPartition::from_blocks_unchecked(sticks.weights))
}

/// Atoms `scale * w_i` at fresh uniform locations.
pub(crate) fn place_uniformly(weights: &[f64], scale: f64, rng: &mut RngStream) -> AtomMeasure {
    let mut atoms: Vec<Atom> = weights.iter().map(|&w| Atom::new(uniform01(rng), scale * w)).collect();
    resolve_collisions(&mut atoms, rng);
    AtomMeasure::from_atoms_unchecked(atoms)
}
