//! The up-down Chinese restaurant chain on partitions of `n`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{domain, Result};
use crate::kernels::Params;
use crate::rng::RngStream;
use crate::types::RankedVector;

/// A partition of `n` customers into tables.
///
/// Each customer carries a table label so that seating by size and uniform
/// removal both take expected constant time.
#[derive(Debug, Clone, PartialEq)]
pub struct CrpState {
    /// Table label of every customer.
    seat: Vec<u32>,
    /// Size per label; zero marks a free label.
    table_sizes: Vec<u32>,
    free: Vec<u32>,
    tables: usize,
}

impl CrpState {
    /// The partition with the given table sizes (all positive).
    pub fn new(sizes: &[u32]) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(domain("table sizes must be positive"));
        }
        let mut seat = Vec::with_capacity(sizes.iter().map(|s| *s as usize).sum::<usize>() + 1);
        for (label, &s) in sizes.iter().enumerate() {
            seat.extend(std::iter::repeat_n(label as u32, s as usize));
        }
        Ok(Self { seat, table_sizes: sizes.to_vec(), free: Vec::new(), tables: sizes.len() })
    }

    /// All `n` customers at one table.
    pub fn single_table(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(domain("need at least one customer"));
        }
        Self::new(&[n])
    }

    pub fn n(&self) -> usize {
        self.seat.len()
    }

    pub fn num_tables(&self) -> usize {
        self.tables
    }

    /// Table sizes in non-increasing order.
    pub fn sizes(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.table_sizes.iter().copied().filter(|s| *s > 0).collect();
        v.sort_unstable_by(|a, b| b.cmp(a));
        v
    }

    pub fn largest(&self) -> u32 {
        self.table_sizes.iter().copied().max().unwrap_or(0)
    }

    /// Ranked table frequencies `n_i / n`.
    pub fn ranked(&self) -> RankedVector {
        let n = self.n().max(1) as f64;
        RankedVector::from_masses(self.sizes().into_iter().map(|s| s as f64 / n).collect(), 0.0)
    }

    fn open_table(&mut self) -> u32 {
        self.tables += 1;
        match self.free.pop() {
            Some(label) => {
                self.table_sizes[label as usize] = 1;
                label
            }
            None => {
                self.table_sizes.push(1);
                (self.table_sizes.len() - 1) as u32
            }
        }
    }

    /// Seats one more customer by the two-parameter rule.
    fn seat_one(&mut self, params: Params, rng: &mut RngStream) {
        let (alpha, theta) = (params.alpha(), params.theta());
        let n = self.n() as f64;
        let k = self.tables as f64;
        let label = if self.seat.is_empty() || rng.random::<f64>() * (n + theta) < theta + alpha * k {
            self.open_table()
        } else {
            // Table i has weight n_i - alpha: pick a uniform customer and keep
            // their table with probability 1 - alpha / n_i.
            loop {
                let c = rng.random_range(0..self.seat.len());
                let label = self.seat[c];
                let size = self.table_sizes[label as usize] as f64;
                if rng.random::<f64>() * size >= alpha {
                    self.table_sizes[label as usize] += 1;
                    break label;
                }
            }
        };
        self.seat.push(label);
    }

    /// Removes a uniformly chosen customer.
    fn remove_one(&mut self, rng: &mut RngStream) {
        let c = rng.random_range(0..self.seat.len());
        let label = self.seat.swap_remove(c);
        let s = &mut self.table_sizes[label as usize];
        *s -= 1;
        if *s == 0 {
            self.tables -= 1;
            self.free.push(label);
        }
    }
}

/// One composite step: seat a customer, then remove a uniform one.
pub fn crp_updown_step(state: &mut CrpState, params: Params, rng: &mut RngStream) -> Result<()> {
    if state.n() == 0 {
        return Err(domain("the up-down chain needs n >= 1"));
    }
    state.seat_one(params, rng);
    state.remove_one(rng);
    Ok(())
}

/// A fresh CRP(alpha, theta) partition of `n` customers.
pub fn crp_sample(n: u32, params: Params, rng: &mut RngStream) -> Result<CrpState> {
    if n == 0 {
        return Err(domain("need at least one customer"));
    }
    let mut state = CrpState { seat: Vec::with_capacity(n as usize + 1), table_sizes: Vec::new(), free: Vec::new(), tables: 0 };
    for _ in 0..n {
        state.seat_one(params, rng);
    }
    Ok(state)
}

/// Exact law of the ranked sizes after one composite step from `state`, by
/// enumerating every up-move and down-move.
pub fn updown_transition_law(state: &CrpState, params: Params) -> Result<Vec<(Vec<u32>, f64)>> {
    let n = state.n();
    if n == 0 {
        return Err(domain("the up-down chain needs n >= 1"));
    }
    let (alpha, theta) = (params.alpha(), params.theta());
    let sizes = state.sizes();
    let denom = n as f64 + theta;
    let mut ups: Vec<(Vec<u32>, f64)> = Vec::with_capacity(sizes.len() + 1);
    for i in 0..sizes.len() {
        let mut s = sizes.clone();
        s[i] += 1;
        ups.push((s, (sizes[i] as f64 - alpha) / denom));
    }
    let mut s = sizes.clone();
    s.push(1);
    ups.push((s, (theta + alpha * sizes.len() as f64) / denom));

    let mut law: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (up, p_up) in ups {
        for j in 0..up.len() {
            let p_down = up[j] as f64 / (n + 1) as f64;
            let mut s = up.clone();
            s[j] -= 1;
            s.retain(|v| *v > 0);
            s.sort_unstable_by(|a, b| b.cmp(a));
            *law.entry(s).or_insert(0.0) += p_up * p_down;
        }
    }
    Ok(law.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Params {
        Params::new(0.5, 0.5).unwrap()
    }

    #[test]
    fn single_customer_returns_to_itself() {
        let s = CrpState::single_table(1).unwrap();
        let law = updown_transition_law(&s, params()).unwrap();
        assert_eq!(law.len(), 1);
        assert_eq!(law[0].0, vec![1]);
        assert!((law[0].1 - 1.0).abs() < 1e-15);
        let mut rng = RngStream::new(1, 0);
        let mut s = s;
        crp_updown_step(&mut s, params(), &mut rng).unwrap();
        assert_eq!(s.sizes(), vec![1]);
    }

    #[test]
    fn two_customer_chain() {
        let p = params();
        let from_two = updown_transition_law(&CrpState::new(&[2]).unwrap(), p).unwrap();
        let from_pair = updown_transition_law(&CrpState::new(&[1, 1]).unwrap(), p).unwrap();
        let get = |law: &[(Vec<u32>, f64)], key: &[u32]| law.iter().find(|(k, _)| k == key).map_or(0.0, |x| x.1);
        assert!((get(&from_two, &[1, 1]) - 4.0 / 15.0).abs() < 1e-15);
        assert!((get(&from_pair, &[2]) - 2.0 / 15.0).abs() < 1e-15);
        for law in [&from_two, &from_pair] {
            assert!((law.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn step_conserves_customers() {
        let p = Params::new(0.3, 1.2).unwrap();
        let mut rng = RngStream::new(5, 0);
        let mut s = crp_sample(50, p, &mut rng).unwrap();
        assert_eq!(s.n(), 50);
        for _ in 0..2000 {
            crp_updown_step(&mut s, p, &mut rng).unwrap();
            assert_eq!(s.n(), 50);
            let sizes = s.sizes();
            assert_eq!(sizes.iter().sum::<u32>(), 50);
            assert_eq!(sizes.len(), s.num_tables());
            assert!(sizes.iter().all(|v| *v > 0));
        }
    }

    #[test]
    fn two_customer_table_count_law() {
        // P(two tables) = (theta + alpha) / (1 + theta) = 2/3.
        let mut rng = RngStream::new(9, 0);
        let n = 60_000;
        let hits = (0..n).filter(|_| crp_sample(2, params(), &mut rng).unwrap().num_tables() == 2).count();
        let p = hits as f64 / n as f64;
        assert!((p - 2.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / n as f64).sqrt(), "{p}");
    }
}
