//! The algebra generated by the power sums `q_m(x) = sum_i x_i^{m+1}`, the
//! ranked-mass generator on it, and the up-down Chinese restaurant chain.

mod crp;
mod sympoly;

pub use crp::{crp_sample, crp_updown_step, updown_transition_law, CrpState};
pub use sympoly::SymPoly;


use crate::error::{domain, Error, Result};
use crate::kernels::Params;
use crate::mpoly::MPoly;

/// Largest number of factors accepted by [`apply_b_partition`].
pub const MAX_PARTITION_FACTORS: usize = 6;

/// A set partition of `{0, ..., k-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionOfSet {
    pub blocks: Vec<Vec<usize>>,
}

/// All set partitions of `{0, ..., k-1}` (Bell(k) of them), via restricted
/// growth strings.
pub fn set_partitions(k: usize) -> Vec<PartitionOfSet> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; k];
    fn rec(pos: usize, max_label: usize, labels: &mut Vec<usize>, out: &mut Vec<PartitionOfSet>) {
        let k = labels.len();
        if pos == k {
            let n_blocks = if k == 0 { 0 } else { max_label + 1 };
            let mut blocks = vec![Vec::new(); n_blocks];
            for (i, &l) in labels.iter().enumerate() {
                blocks[l].push(i);
            }
            out.push(PartitionOfSet { blocks });
            return;
        }
        let limit = if pos == 0 { 0 } else { max_label + 1 };
        for l in 0..=limit {
            labels[pos] = l;
            rec(pos + 1, if pos == 0 { 0 } else { max_label.max(l) }, labels, out);
        }
    }
    rec(0, 0, &mut labels, &mut out);
    out
}

/// `E[q_m]` under PD(alpha, theta): `prod_{j=1}^m (j - alpha)/(j + theta)`.
pub fn stationary_moment(m: u32, alpha: f64, theta: f64) -> Result<f64> {
    Params::new(alpha, theta)?;
    if m == 0 {
        return Err(domain("stationary moment needs m >= 1"));
    }
    Ok((1..=m).map(|j| (j as f64 - alpha) / (j as f64 + theta)).product())
}

/// Probability under PD(alpha, theta) that the first `sum n_i` points of the
/// paintbox fall into distinct blocks of the listed sizes, in a fixed
/// labelling. Equals `E[sum over distinct i_1..i_r of prod_j x_{i_j}^{n_j}]`.
pub fn eppf(sizes: &[u32], alpha: f64, theta: f64) -> f64 {
    let n: u32 = sizes.iter().sum();
    let mut p = 1.0;
    for i in 1..sizes.len() {
        p *= theta + i as f64 * alpha;
    }
    for &ni in sizes {
        for l in 1..ni {
            p *= l as f64 - alpha;
        }
    }
    for l in 1..n {
        p /= theta + l as f64;
    }
    p
}

/// `E[prod_j q_{m_j}]` under PD(alpha, theta), by splitting the product over
/// the set partitions of its factors.
pub fn pd_power_sum_moment(ms: &[u32], alpha: f64, theta: f64) -> f64 {
    set_partitions(ms.len())
        .iter()
        .map(|part| {
            let sizes: Vec<u32> = part.blocks.iter().map(|b| b.iter().map(|&j| ms[j] + 1).sum()).collect();
            eppf(&sizes, alpha, theta)
        })
        .sum()
}

/// `B q(x)` for `B = sum_i x_i d_i^2 - sum_{i,j} x_i x_j d_i d_j - sum_i (theta x_i + alpha) d_i`,
/// by expanding `q` as a polynomial in the entries of `x` and differentiating.
///
/// One zero-valued coordinate is appended to stand for the infinitely many
/// inactive coordinates. Every variable occurs with exponent at least two, so
/// the first-order term `-alpha d_i q` vanishes at every zero coordinate and the
/// finite evaluation equals the infinite sum.
pub fn apply_b_direct(q: &SymPoly, alpha: f64, theta: f64, x: &[f64]) -> Result<f64> {
    Params::new(alpha, theta)?;
    let mut coords = x.to_vec();
    coords.push(0.0);
    let n = coords.len();
    let mut total = 0.0;
    for (multiset, coeff) in q.terms() {
        if multiset.is_empty() {
            continue;
        }
        let mut poly = MPoly::power_sum(n, multiset[0] + 1);
        for &m in &multiset[1..] {
            poly = poly.mul(&MPoly::power_sum(n, m + 1));
        }
        assert!(poly.min_exponent().is_none_or(|e| e >= 2), "power sums have exponents of at least two");
        let c = &coords;
        total += coeff
            * poly.apply_second_order(c, |i| c[i], |i, j| -c[i] * c[j], |i| -(theta * c[i] + alpha));
    }
    Ok(total)
}

/// `w_0^{e_0} ... w_{r-1}^{e_{r-1}}` with exponent `e_skip` lowered by `lower`.
fn monomial_lowered(w: &[f64], e: &[u32], skip: usize, lower: u32) -> f64 {
    let mut p = 1.0;
    for (i, (&wi, &ei)) in w.iter().zip(e).enumerate() {
        let ei = if i == skip { ei - lower } else { ei };
        p *= wi.powi(ei as i32);
    }
    p
}

/// The operator
/// `2 sum_i w_i d_i^2 - 2 sum_{i,j} w_i w_j d_i d_j - 2 sum_i (theta w_i + alpha) d_i`
/// on `r` variables, applied to `prod_i w_i^{e_i}` (all `e_i >= 1`).
pub fn apply_ak(exponents: &[u32], alpha: f64, theta: f64, w: &[f64]) -> Result<f64> {
    if exponents.len() != w.len() || exponents.contains(&0) {
        return Err(domain("apply_ak: exponents must be positive and match w"));
    }
    let r = w.len();
    let mut diag = 0.0;
    let mut drift = 0.0;
    for i in 0..r {
        let e = exponents[i] as f64;
        if exponents[i] >= 2 {
            diag += w[i] * e * (e - 1.0) * monomial_lowered(w, exponents, i, 2);
        }
        drift += (theta * w[i] + alpha) * e * monomial_lowered(w, exponents, i, 1);
    }
    let mut cross = 0.0;
    for i in 0..r {
        for j in 0..r {
            let (ei, ej) = (exponents[i] as f64, exponents[j] as f64);
            let d = if i == j {
                if exponents[i] < 2 {
                    0.0
                } else {
                    ei * (ei - 1.0) * monomial_lowered(w, exponents, i, 2)
                }
            } else {
                let mut e2 = exponents.to_vec();
                e2[i] -= 1;
                e2[j] -= 1;
                ei * ej * monomial_lowered(w, &e2, usize::MAX, 0)
            };
            cross += w[i] * w[j] * d;
        }
    }
    Ok(2.0 * diag - 2.0 * cross - 2.0 * drift)
}

/// Calls `f` with every ordered tuple of `r` distinct indices below `n`.
fn for_each_distinct_tuple(n: usize, r: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(n: usize, r: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == r {
            f(cur);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(n, r, cur, used, f);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(n, r, &mut Vec::with_capacity(r), &mut vec![false; n], f);
}

/// `2 B q(x)` by splitting `q_m = prod_j q_{m_j}` over set partitions of the
/// factors and applying the `r`-variable operator [`apply_ak`] to the merged
/// monomials on distinct coordinates.
pub fn apply_b_partition(q: &SymPoly, alpha: f64, theta: f64, x: &[f64]) -> Result<f64> {
    Params::new(alpha, theta)?;
    // Coordinates equal to zero contribute nothing since every exponent is >= 2.
    let active: Vec<f64> = x.iter().copied().filter(|v| *v > 0.0).collect();
    let mut total = 0.0;
    for (multiset, coeff) in q.terms() {
        let k = multiset.len();
        if k == 0 {
            continue;
        }
        if k > MAX_PARTITION_FACTORS {
            return Err(Error::Complexity { k, max: MAX_PARTITION_FACTORS });
        }
        let mut term_sum = 0.0;
        for part in set_partitions(k) {
            let exps: Vec<u32> = part.blocks.iter().map(|b| b.iter().map(|&j| multiset[j] + 1).sum()).collect();
            let r = exps.len();
            let mut w = vec![0.0; r];
            let mut err = None;
            for_each_distinct_tuple(active.len(), r, &mut |h| {
                for (slot, &i) in w.iter_mut().zip(h) {
                    *slot = active[i];
                }
                match apply_ak(&exps, alpha, theta, &w) {
                    Ok(v) => term_sum += v,
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        total += coeff * term_sum;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(s: &str) -> SymPoly {
        s.parse().unwrap()
    }

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (0..=6).map(|k| set_partitions(k).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 5, 15, 52, 203]);
        for part in set_partitions(4) {
            let mut all: Vec<usize> = part.blocks.concat();
            all.sort_unstable();
            assert_eq!(all, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn stationary_moment_values() {
        assert_relative_eq!(stationary_moment(1, 0.5, 0.5).unwrap(), 1.0 / 3.0);
        assert_relative_eq!(stationary_moment(2, 0.5, 0.5).unwrap(), 0.2);
        assert_relative_eq!(stationary_moment(1, 0.25, 0.0).unwrap(), 0.75);
        assert!(stationary_moment(1, 0.5, -0.6).is_err());
    }

    #[test]
    fn pd_moments_match_products() {
        for (a, t) in [(0.5, 0.5), (0.3, 0.0), (0.5, -0.25)] {
            for m in 1..5 {
                let want = stationary_moment(m, a, t).unwrap();
                assert_relative_eq!(pd_power_sum_moment(&[m], a, t), want, max_relative = 1e-14);
            }
            // E[q_1^2] = E[sum x^4] + E[sum_{i != j} x_i^2 x_j^2].
            let want = eppf(&[4], a, t) + eppf(&[2, 2], a, t);
            assert_relative_eq!(pd_power_sum_moment(&[1, 1], a, t), want, max_relative = 1e-14);
        }
        // PD(0, 1) has sum x_i = 1: sizes (1) give one.
        assert_relative_eq!(eppf(&[1], 0.5, 0.5), 1.0);
    }

    #[test]
    fn direct_route_examples() {
        assert_eq!(apply_b_direct(&p("1.0"), 0.5, 0.0, &[0.9, 0.1]).unwrap(), 0.0);
        let v = 2.0 * apply_b_direct(&p("q[1]"), 0.5, 0.0, &[0.9, 0.1]).unwrap();
        assert_relative_eq!(v, -1.28, epsilon = 1e-14);
        let v = 2.0 * apply_b_direct(&p("q[1]"), 0.5, 0.5, &[1.0]).unwrap();
        assert_relative_eq!(v, -4.0, epsilon = 1e-14);
    }

    #[test]
    fn partition_route_examples() {
        assert_eq!(apply_b_partition(&p("1.0"), 0.5, 0.5, &[0.5, 0.5]).unwrap(), 0.0);
        let x = [0.6, 0.4];
        let a = apply_b_partition(&p("q[2]"), 0.3, 0.7, &x).unwrap();
        let b = 2.0 * apply_b_direct(&p("q[2]"), 0.3, 0.7, &x).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
        let x = [0.5, 0.3, 0.2];
        let a = apply_b_partition(&p("q[1]q[1]"), 0.5, 0.5, &x).unwrap();
        let b = 2.0 * apply_b_direct(&p("q[1]q[1]"), 0.5, 0.5, &x).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn single_power_sum_closed_form() {
        // 2 B q_m = 2(m+1)(m-a) sum x^m - 2(m+1)(m+t) sum x^{m+1}
        let x = [0.5, 0.25, 0.15, 0.1];
        let (a, t) = (0.35, 1.4);
        for m in 1..5u32 {
            let mf = m as f64;
            let s0: f64 = x.iter().map(|v: &f64| v.powi(m as i32)).sum();
            let s1: f64 = x.iter().map(|v: &f64| v.powi(m as i32 + 1)).sum();
            let expect = 2.0 * (mf + 1.0) * (mf - a) * s0 - 2.0 * (mf + 1.0) * (mf + t) * s1;
            let q = SymPoly::power_sum(m).unwrap();
            assert_relative_eq!(2.0 * apply_b_direct(&q, a, t, &x).unwrap(), expect, max_relative = 1e-12);
            assert_relative_eq!(apply_b_partition(&q, a, t, &x).unwrap(), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_coordinates_are_inert() {
        let q = p("q[1]q[2]");
        let a = apply_b_direct(&q, 0.4, 0.3, &[0.7, 0.3]).unwrap();
        let b = apply_b_direct(&q, 0.4, 0.3, &[0.7, 0.3, 0.0, 0.0]).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn complexity_limit() {
        let q = p("q[1]q[1]q[1]q[1]q[1]q[1]q[1]");
        assert!(matches!(apply_b_partition(&q, 0.5, 0.5, &[0.5, 0.5]), Err(Error::Complexity { k: 7, .. })));
    }
}
