//! Time change `rho(t) = inf{s : int_0^s dv / M_v > t}` and normalisation.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::path::{trapezoid_clock, GridPath, MassChain, MassState};
use crate::rng::RngStream;

/// Remaining source time below this fraction of the step counts as arrived.
const LANDING_SLACK: f64 = 1e-6;

/// The clock of a grid path and the range of times it can invert.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeChange {
    pub source_times: Vec<f64>,
    pub clock_values: Vec<f64>,
    /// Largest finite clock value; `rho` is available strictly below it.
    pub horizon_t: f64,
    /// Whether the source path reached zero mass.
    pub extinct: bool,
}

/// Builds the trapezoidal clock of `path`.
pub fn build_time_change<S: MassState>(path: &GridPath<S>) -> Result<TimeChange> {
    let masses = path.masses();
    if masses.first().is_none_or(|m| *m <= 0.0) {
        return Err(domain("time change needs positive mass at time 0"));
    }
    let clock = trapezoid_clock(&path.times, &masses);
    let last_finite = clock.iter().rposition(|c| c.is_finite()).unwrap_or(0);
    Ok(TimeChange {
        source_times: path.times.clone(),
        horizon_t: clock[last_finite],
        extinct: clock.iter().any(|c| c.is_infinite()),
        clock_values: clock,
    })
}

impl TimeChange {
    fn check_range(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(domain(format!("time change at negative time {t}")));
        }
        if t >= self.horizon_t && t > 0.0 {
            return Err(Error::Range(format!("t = {t} is beyond the clock horizon {}", self.horizon_t)));
        }
        Ok(())
    }

    /// Index of the first grid point whose clock is at least `t`.
    pub fn index_at_or_after(&self, t: f64) -> Result<usize> {
        self.check_range(t)?;
        Ok(self.clock_values.partition_point(|&c| c < t))
    }

    /// `rho(t)` by linear interpolation of the clock.
    pub fn rho(&self, t: f64) -> Result<f64> {
        let j = self.index_at_or_after(t)?;
        if j == 0 {
            return Ok(self.source_times[0]);
        }
        let (c0, c1) = (self.clock_values[j - 1], self.clock_values[j]);
        let (s0, s1) = (self.source_times[j - 1], self.source_times[j]);
        Ok(s0 + (t - c0) / (c1 - c0) * (s1 - s0))
    }
}

/// Normalised states at the grid points at or after `rho(t)` for each `t`.
pub fn depoissonize<S: MassState>(path: &GridPath<S>, tc: &TimeChange, t_grid: &[f64]) -> Result<GridPath<S>> {
    let mut states = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let j = tc.index_at_or_after(t)?;
        states.push(path.states[j].normalized()?);
    }
    Ok(GridPath { times: t_grid.to_vec(), states, clock: t_grid.to_vec(), extinct_at: None })
}

/// Summary of a streamed de-Poissonisation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StreamSummary {
    /// Source (superprocess) time reached.
    pub source_time: f64,
    pub steps: usize,
    /// Targets served by the last positive state because the mass died out.
    pub extinct_targets: usize,
}

/// Runs `chain` until its clock passes each target time in turn and hands the
/// (unnormalised) state at that moment to `visit`.
///
/// Steps are `min(step, (t - clock) M)` and the short step ends at `rho(t)` up
/// to the clock quadrature error of one step. Every step is an exact
/// transition. Targets must be nondecreasing and nonnegative.
pub fn stream_depoissonized<C, F>(
    chain: &mut C,
    targets: &[f64],
    step: f64,
    rng: &mut RngStream,
    mut visit: F,
) -> Result<StreamSummary>
where
    C: MassChain,
    F: FnMut(usize, &C::State) -> Result<()>,
{
    if !(step > 0.0) {
        return Err(domain("step must be positive"));
    }
    if targets.iter().any(|t| !(*t >= 0.0)) || targets.windows(2).any(|w| w[1] < w[0]) {
        return Err(domain("targets must be nonnegative and nondecreasing"));
    }
    let mut mass = chain.total_mass();
    if mass <= 0.0 {
        return Err(domain("time change needs positive mass at time 0"));
    }
    let mut summary = StreamSummary::default();
    let mut clock = 0.0;
    for (k, &t) in targets.iter().enumerate() {
        while (t - clock) * mass > step * LANDING_SLACK {
            // The step that reaches `t` on the current mass is taken as landing
            // there; chasing the trapezoid clock further only makes tiny steps.
            let landing = (t - clock) * mass <= step;
            let h = if landing { (t - clock) * mass } else { step };
            chain.advance(h, rng)?;
            summary.steps += 1;
            summary.source_time += h;
            let next = chain.total_mass();
            if next <= 0.0 {
                for kk in k..targets.len() {
                    visit(kk, chain.previous_state())?;
                }
                summary.extinct_targets = targets.len() - k;
                return Ok(summary);
            }
            clock = if landing { t } else { clock + 0.5 * h * (1.0 / mass + 1.0 / next) };
            mass = next;
        }
        chain.resolve(rng)?;
        visit(k, chain.state())?;
    }
    Ok(summary)
}
