//! Negative `theta`: the largest atom is followed as an absorbed squared Bessel
//! process without descendants while everything else evolves with immigration
//! parameter `theta + alpha`. When the followed atom dies, the largest atom of
//! the current state takes its place.

use super::{kernel_step_lazy, Params, Resolution};
use crate::besq::{euler_negative_advance, DEFAULT_RELATIVE_STEP};
use crate::error::{domain, Error, Result};
use crate::path::{GridPath, MassChain, MassState};
use crate::rng::RngStream;
use crate::types::{Atom, AtomMeasure, MassSequence};

pub const DEFAULT_EPOCH_CAP: usize = 10_000;

/// Total mass, relative to the initial one, below which the state is taken
/// as absorbed at zero. Without it the re-designations pile up in finite time
/// just before the true absorption.
pub const EXTINCTION_FRACTION: f64 = 1e-12;

/// The followed atom and the remaining measure.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeThetaState {
    pub designated: Option<Atom>,
    pub rest: AtomMeasure,
}

impl NegativeThetaState {
    /// Splits off the largest atom (ties to the smaller location), drawing
    /// from the dust as far as needed to know which atom that is.
    pub fn designate(mut mu: AtomMeasure, rng: &mut RngStream) -> Result<Self> {
        let Some(top) = mu.resolve_largest(rng)? else {
            return Ok(Self { designated: None, rest: mu });
        };
        let (atoms, dust) = mu.into_parts();
        let rest: Vec<Atom> = atoms.into_iter().filter(|a| a.location != top.location).collect();
        Ok(Self { designated: Some(top), rest: AtomMeasure::from_parts_unchecked(rest, dust) })
    }

    /// The superposition as one measure.
    pub fn to_measure(&self) -> AtomMeasure {
        let mut atoms = self.rest.atoms().to_vec();
        atoms.extend(self.designated);
        AtomMeasure::from_parts_unchecked(atoms, self.rest.dust().to_vec())
    }
}

impl MassSequence for NegativeThetaState {
    fn mass_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.designated.iter().map(|a| a.mass).chain(self.rest.atoms().iter().map(|a| a.mass))
    }
    fn total_mass(&self) -> f64 {
        self.designated.map_or(0.0, |a| a.mass) + self.rest.total_mass()
    }
    fn unlisted_mass(&self) -> f64 {
        self.rest.dust_mass()
    }
}

impl MassState for NegativeThetaState {
    fn total_mass(&self) -> f64 {
        MassSequence::total_mass(self)
    }
    fn normalized(&self) -> Result<Self> {
        let m = MassSequence::total_mass(self);
        if m <= 0.0 {
            return Err(domain("cannot normalize the zero measure"));
        }
        let rest = if self.rest.is_empty() { AtomMeasure::zero() } else { self.rest.scaled(1.0 / m)? };
        Ok(Self { designated: self.designated.map(|a| Atom::new(a.location, a.mass / m)), rest })
    }
}

/// Markov chain for `theta` in `(-alpha, 0)`.
#[derive(Debug, Clone)]
pub struct NegativeThetaChain {
    alpha: f64,
    rest_params: Params,
    resolution: Resolution,
    relative_substep: f64,
    epoch_cap: usize,
    epochs: usize,
    extinction_mass: f64,
    substep: f64,
    time: f64,
    current: NegativeThetaState,
    previous: NegativeThetaState,
}

impl NegativeThetaChain {
    pub fn new(mu0: AtomMeasure, params: Params) -> Result<Self> {
        if params.theta() >= 0.0 {
            return Err(domain(format!("theta = {} is not negative", params.theta())));
        }
        let rest_params = Params::new(params.alpha(), params.theta() + params.alpha())?;
        let extinction_mass = EXTINCTION_FRACTION * mu0.total_mass();
        // The followed atom is chosen at the first advance, which has an rng.
        let current = NegativeThetaState { designated: None, rest: mu0 };
        let mut chain = Self {
            alpha: params.alpha(),
            rest_params,
            resolution: Resolution::default(),
            relative_substep: DEFAULT_RELATIVE_STEP,
            epoch_cap: DEFAULT_EPOCH_CAP,
            epochs: 0,
            extinction_mass,
            substep: 0.0,
            time: 0.0,
            previous: current.clone(),
            current,
        };
        chain.reset_substep();
        Ok(chain)
    }

    /// Dust drawing applied to the rest of the state before observation.
    pub fn with_resolution(mut self, resolution: Resolution) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn with_epoch_cap(mut self, cap: usize) -> Self {
        self.epoch_cap = cap;
        self
    }

    /// Euler step for the followed atom, relative to its mass at designation.
    pub fn with_relative_substep(mut self, relative: f64) -> Self {
        self.relative_substep = relative;
        self.reset_substep();
        self
    }

    /// Number of re-designations so far.
    pub fn epochs(&self) -> usize {
        self.epochs
    }

    fn reset_substep(&mut self) {
        let b = self.current.designated.map_or(0.0, |a| a.mass);
        self.substep = (self.relative_substep * b).max(1e-12);
    }

    fn evolve_rest(&mut self, dt: f64, rng: &mut RngStream) -> Result<()> {
        self.current.rest = kernel_step_lazy(&self.current.rest, dt, self.rest_params, rng)?;
        Ok(())
    }
}

impl MassChain for NegativeThetaChain {
    type State = NegativeThetaState;

    fn state(&self) -> &NegativeThetaState {
        &self.current
    }

    fn previous_state(&self) -> &NegativeThetaState {
        &self.previous
    }

    fn advance(&mut self, dt: f64, rng: &mut RngStream) -> Result<()> {
        self.previous = self.current.clone();
        let mut remaining = dt;
        while remaining > 0.0 {
            if MassSequence::total_mass(&self.current) <= self.extinction_mass {
                self.current = NegativeThetaState { designated: None, rest: AtomMeasure::zero() };
                self.time += remaining;
                break;
            }
            let Some(top) = self.current.designated else {
                // Only the zero measure has nothing to follow, and it is absorbing.
                if self.current.rest.is_empty() {
                    break;
                }
                self.current = NegativeThetaState::designate(std::mem::take(&mut self.current.rest), rng)?;
                self.reset_substep();
                continue;
            };
            let (z, hit) = euler_negative_advance(top.mass, self.alpha, remaining, self.substep, rng);
            match hit {
                None => {
                    self.evolve_rest(remaining, rng)?;
                    self.current.designated = Some(Atom::new(top.location, z));
                    self.time += remaining;
                    remaining = 0.0;
                }
                Some(h) => {
                    let h = h.min(remaining);
                    if h > 0.0 {
                        self.evolve_rest(h, rng)?;
                    }
                    self.time += h;
                    remaining -= h;
                    self.epochs += 1;
                    if self.epochs > self.epoch_cap {
                        return Err(Error::EpochCap { cap: self.epoch_cap, time: self.time, partial: None });
                    }
                    self.current = NegativeThetaState::designate(std::mem::take(&mut self.current.rest), rng)?;
                    self.reset_substep();
                }
            }
        }
        Ok(())
    }

    fn resolve(&mut self, rng: &mut RngStream) -> Result<()> {
        self.resolution.apply(&mut self.current.rest, rng)
    }
}

/// Grid path for `theta` in `(-alpha, 0)`; states are the superposition of the
/// followed atom and the rest.
pub fn sssp_negative_theta(
    mu0: &AtomMeasure,
    step: f64,
    horizon: f64,
    alpha: f64,
    theta: f64,
    rng: &mut RngStream,
) -> Result<GridPath<AtomMeasure>> {
    let mut chain = NegativeThetaChain::new(mu0.clone(), Params::new(alpha, theta)?)?;
    let times = crate::besq::time_grid(step, horizon)?;
    let mut states = Vec::with_capacity(times.len());
    chain.resolve(rng)?;
    states.push(chain.state().to_measure());
    for w in times.windows(2) {
        if let Err(e) = chain.advance(w[1] - w[0], rng) {
            return Err(match e {
                Error::EpochCap { cap, time, .. } => {
                    let done = times[..states.len()].to_vec();
                    let partial = GridPath::from_states(done, states)?;
                    Error::EpochCap { cap, time, partial: Some(Box::new(partial)) }
                }
                other => other,
            });
        }
        chain.resolve(rng)?;
        states.push(chain.state().to_measure());
    }
    GridPath::from_states(times, states)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn designation_picks_largest() {
        let mu = AtomMeasure::new(vec![Atom::new(0.1, 0.2), Atom::new(0.6, 0.5), Atom::new(0.3, 0.5)]).unwrap();
        let s = NegativeThetaState::designate(mu, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(s.designated.unwrap().location, 0.3);
        assert_eq!(s.rest.len(), 2);
    }

    #[test]
    fn requires_negative_theta() {
        let mu = AtomMeasure::dirac(0.5, 1.0).unwrap();
        assert!(NegativeThetaChain::new(mu, Params::new(0.5, 0.1).unwrap()).is_err());
    }

    #[test]
    fn epoch_cap_returns_partial_path() {
        let mu = AtomMeasure::dirac(0.5, 0.01).unwrap();
        let params = Params::new(0.5, -0.25).unwrap();
        let mut chain = NegativeThetaChain::new(mu.clone(), params).unwrap().with_epoch_cap(0);
        let mut rng = RngStream::new(1, 0);
        let mut err = None;
        for _ in 0..1000 {
            if let Err(e) = chain.advance(0.01, &mut rng) {
                err = Some(e);
                break;
            }
        }
        assert!(matches!(err, Some(Error::EpochCap { cap: 0, .. })));
    }

    #[test]
    fn grid_states_are_valid_measures() {
        let mu = AtomMeasure::new(vec![Atom::new(0.2, 0.6), Atom::new(0.7, 0.4)]).unwrap();
        let path = sssp_negative_theta(&mu, 0.01, 0.2, 0.5, -0.25, &mut RngStream::new(3, 0)).unwrap();
        for s in &path.states {
            s.validate().unwrap();
        }
    }

    #[test]
    fn small_mass_is_absorbed() {
        let mu = AtomMeasure::dirac(0.5, 0.05).unwrap();
        let params = Params::new(0.5, -0.25).unwrap();
        let mut chain = NegativeThetaChain::new(mu, params).unwrap();
        let mut rng = RngStream::new(11, 0);
        for _ in 0..200 {
            chain.advance(0.01, &mut rng).unwrap();
        }
        assert_eq!(MassSequence::total_mass(chain.state()), 0.0);
    }
}
