use super::{check_positive, draw_l, push_cloud_blocks, select_survivors, Params, Resolution};
use crate::error::Result;
use crate::path::MassChain;
use crate::rng::RngStream;
use crate::specialfn::gamma;
use crate::types::IntervalPartition;

/// One exact draw from the interval-partition kernel over time `s`.
pub fn ip_kernel_step(
    beta: &IntervalPartition,
    s: f64,
    params: Params,
    rng: &mut RngStream,
) -> Result<IntervalPartition> {
    ip_kernel_step_with(beta, s, params, &Resolution::interval(), rng)
}

pub fn ip_kernel_step_with(
    beta: &IntervalPartition,
    s: f64,
    params: Params,
    res: &Resolution,
    rng: &mut RngStream,
) -> Result<IntervalPartition> {
    check_positive("s", s)?;
    params.require_nonnegative_theta()?;
    let r = 0.5 / s;
    let mut out = Vec::with_capacity(beta.len() + 16);
    let g0 = gamma(params.theta, r, rng)?;
    push_cloud_blocks(&mut out, g0, params, r, res, rng)?;

    let mut survivors = Vec::new();
    select_survivors(beta.blocks().iter().copied(), r, rng, &mut survivors);
    let offspring = Params { alpha: params.alpha, theta: params.alpha };
    for &i in &survivors {
        let b = beta.blocks()[i];
        let c = draw_l(b, r, params.alpha, rng)?;
        if c > 0.0 {
            out.push(c);
        }
        let g = gamma(params.alpha, r, rng)?;
        push_cloud_blocks(&mut out, g, offspring, r, res, rng)?;
    }
    Ok(IntervalPartition::from_blocks_unchecked(out))
}

/// The interval-partition evolution as a Markov chain (`theta >= 0`).
#[derive(Debug, Clone)]
pub struct IpChain {
    params: Params,
    resolution: Resolution,
    current: IntervalPartition,
    previous: IntervalPartition,
}

impl IpChain {
    pub fn new(beta0: IntervalPartition, params: Params) -> Result<Self> {
        params.require_nonnegative_theta()?;
        Ok(Self { params, resolution: Resolution::interval(), previous: beta0.clone(), current: beta0 })
    }
}

impl MassChain for IpChain {
    type State = IntervalPartition;

    fn state(&self) -> &IntervalPartition {
        &self.current
    }

    fn previous_state(&self) -> &IntervalPartition {
        &self.previous
    }

    fn advance(&mut self, dt: f64, rng: &mut RngStream) -> Result<()> {
        let next = ip_kernel_step_with(&self.current, dt, self.params, &self.resolution, rng)?;
        self.previous = std::mem::replace(&mut self.current, next);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stays_empty_without_immigration() {
        let p = Params::new(0.5, 0.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..50 {
            assert!(ip_kernel_step(&IntervalPartition::empty(), 0.2, p, &mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn blocks_positive() {
        let p = Params::new(0.3, 1.0).unwrap();
        let mut b = IntervalPartition::new(vec![0.5, 0.5]).unwrap();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..20 {
            b = ip_kernel_step(&b, 0.05, p, &mut rng).unwrap();
            assert!(b.blocks().iter().all(|x| *x > 0.0));
        }
    }
}
