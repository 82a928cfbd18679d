//! Grid paths of mass-carrying Markov chains.

use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;

use crate::error::{domain, Result};
use crate::rng::RngStream;
use crate::types::{AtomMeasure, IntervalPartition};

/// A state with a total mass that can be normalised to mass one.
pub trait MassState: Clone {
    fn total_mass(&self) -> f64;
    fn normalized(&self) -> Result<Self>;
}

impl MassState for AtomMeasure {
    fn total_mass(&self) -> f64 {
        AtomMeasure::total_mass(self)
    }
    fn normalized(&self) -> Result<Self> {
        AtomMeasure::normalized(self)
    }
}

impl MassState for IntervalPartition {
    fn total_mass(&self) -> f64 {
        IntervalPartition::total_mass(self)
    }
    fn normalized(&self) -> Result<Self> {
        let m = self.total_mass();
        if m <= 0.0 {
            return Err(domain("cannot normalize the empty partition"));
        }
        crate::types::scale(1.0 / m, self)
    }
}

/// A vector of nonnegative coordinates, e.g. independent squared Bessel values.
impl MassState for Vec<f64> {
    fn total_mass(&self) -> f64 {
        self.iter().sum()
    }
    fn normalized(&self) -> Result<Self> {
        let m: f64 = self.iter().sum();
        if m <= 0.0 {
            return Err(domain("cannot normalize a zero vector"));
        }
        Ok(self.iter().map(|x| x / m).collect())
    }
}

/// A time-homogeneous Markov chain whose states carry mass.
pub trait MassChain {
    type State: MassState;

    fn state(&self) -> &Self::State;

    /// The state before the most recent call to [`MassChain::advance`].
    fn previous_state(&self) -> &Self::State;

    fn advance(&mut self, dt: f64, rng: &mut RngStream) -> Result<()>;

    /// Draws whatever part of the current state is kept implicit, so that it
    /// can be observed. The law of the chain is unchanged.
    fn resolve(&mut self, _rng: &mut RngStream) -> Result<()> {
        Ok(())
    }

    fn total_mass(&self) -> f64 {
        self.state().total_mass()
    }
}

/// States on a time grid with the running clock `int_0^s dv / M_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    /// Trapezoidal clock; `+inf` from the first zero-mass grid point on.
    pub clock: Vec<f64>,
    /// Index of the first grid point with zero total mass.
    pub extinct_at: Option<usize>,
}

impl<S: MassState> GridPath<S> {
    pub fn from_states(times: Vec<f64>, states: Vec<S>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(domain("grid path needs one state per time"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("grid times must increase"));
        }
        let masses: Vec<f64> = states.iter().map(|s| s.total_mass()).collect();
        let clock = trapezoid_clock(&times, &masses);
        let extinct_at = masses.iter().position(|m| *m <= 0.0);
        Ok(Self { times, states, clock, extinct_at })
    }

    pub fn masses(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.total_mass()).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `int_0^{s_j} dv / M_v` by the trapezoidal rule; infinite once a mass is zero.
pub fn trapezoid_clock(times: &[f64], masses: &[f64]) -> Vec<f64> {
    let mut clock = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for j in 0..times.len() {
        if j > 0 {
            let (m0, m1) = (masses[j - 1], masses[j]);
            acc += if m0 > 0.0 && m1 > 0.0 {
                0.5 * (times[j] - times[j - 1]) * (1.0 / m0 + 1.0 / m1)
            } else {
                f64::INFINITY
            };
        } else if masses[0] <= 0.0 {
            acc = f64::INFINITY;
        }
        clock.push(acc);
    }
    clock
}

/// Runs `chain` on the uniform grid `0, step, ..., horizon`.
pub fn simulate_grid<C: MassChain>(
    chain: &mut C,
    step: f64,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<GridPath<C::State>> {
    let times = crate::besq::time_grid(step, horizon)?;
    let mut states = Vec::with_capacity(times.len());
    chain.resolve(rng)?;
    states.push(chain.state().clone());
    for w in times.windows(2) {
        chain.advance(w[1] - w[0], rng)?;
        chain.resolve(rng)?;
        states.push(chain.state().clone());
    }
    GridPath::from_states(times, states)
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

impl<S: MassState + Serialize> GridPath<S> {
    /// One JSON object per grid point. `field` names the state, e.g. `atoms`.
    pub fn to_json_lines(&self, field: &str) -> Result<String> {
        let mut out = String::new();
        for ((t, s), c) in self.times.iter().zip(&self.states).zip(&self.clock) {
            let mut obj = serde_json::Map::new();
            obj.insert("time".into(), json!(t));
            obj.insert("total_mass".into(), json!(s.total_mass()));
            obj.insert("clock_integral".into(), finite_or_null(*c));
            obj.insert(field.into(), serde_json::to_value(s).map_err(|e| domain(e.to_string()))?);
            out.push_str(&serde_json::Value::Object(obj).to_string());
            out.push('\n');
        }
        Ok(out)
    }
}

impl GridPath<f64> {
    /// `time,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,value\n");
        for (t, v) in self.times.iter().zip(&self.states) {
            let _ = writeln!(s, "{t},{v}");
        }
        s
    }
}

impl GridPath<Vec<f64>> {
    /// `time,x1,x2,...` rows.
    pub fn to_csv(&self) -> String {
        let dim = self.states.first().map_or(0, Vec::len);
        let mut s = String::from("time");
        for i in 1..=dim {
            let _ = write!(s, ",x{i}");
        }
        s.push('\n');
        for (t, v) in self.times.iter().zip(&self.states) {
            let _ = write!(s, "{t}");
            for x in v {
                let _ = write!(s, ",{x}");
            }
            s.push('\n');
        }
        s
    }
}

/// A scalar mass is its own state; normalising gives one.
impl MassState for f64 {
    fn total_mass(&self) -> f64 {
        *self
    }
    fn normalized(&self) -> Result<Self> {
        if *self <= 0.0 {
            return Err(domain("cannot normalize zero mass"));
        }
        Ok(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_of_constant_mass_is_time() {
        let t = [0.0, 0.5, 1.0];
        assert_eq!(trapezoid_clock(&t, &[1.0; 3]), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn clock_diverges_at_zero_mass() {
        let c = trapezoid_clock(&[0.0, 1.0, 2.0], &[1.0, 0.0, 0.0]);
        assert_eq!(c[0], 0.0);
        assert!(c[1].is_infinite() && c[2].is_infinite());
        let p = GridPath::from_states(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(p.extinct_at, Some(1));
    }

    #[test]
    fn json_lines_schema() {
        let m = AtomMeasure::dirac(0.5, 2.0).unwrap();
        let p = GridPath::from_states(vec![0.0, 1.0], vec![m.clone(), m]).unwrap();
        let s = p.to_json_lines("atoms").unwrap();
        let first: serde_json::Value = serde_json::from_str(s.lines().next().unwrap()).unwrap();
        assert_eq!(first["atoms"], json!([[0.5, 2.0]]));
        assert_eq!(first["clock_integral"], json!(0.0));
        assert_eq!(first["total_mass"], json!(2.0));
    }
}
