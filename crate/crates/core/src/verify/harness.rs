//! Fleming-Viot observation helpers, the generator slope test, the
//! reversibility test and the report record.

use std::collections::BTreeMap;

use serde::Serialize;

use super::stats::{mc_collect, Estimate, Exec, KsResult};
use crate::depoisson::stream_depoissonized;
use crate::ekp::{apply_b_partition, pd_power_sum_moment, set_partitions, SymPoly};
use crate::error::{domain, Result};
use crate::kernels::{NegativeThetaChain, Params, Resolution, SsspChain};
use crate::path::MassState;
use crate::rng::RngStream;
use crate::types::{Atom, AtomMeasure, Dust, RankedVector};

/// One checked quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub estimate: f64,
    pub reference: f64,
    /// Standard error of `estimate`; absent for KS tests (the estimate is
    /// then the p-value and the reference its threshold) and exact checks.
    pub se: Option<f64>,
    pub pass: bool,
}

impl Report {
    /// `estimate` within `k` standard errors of `reference`.
    pub fn moment(name: &str, params: &[(&str, f64)], est: Estimate, reference: f64, k: f64) -> Self {
        Self {
            name: name.to_string(),
            params: param_map(params),
            estimate: est.mean,
            reference,
            se: Some(est.se),
            pass: est.within(reference, k),
        }
    }

    /// KS p-value above `threshold`.
    pub fn ks(name: &str, params: &[(&str, f64)], ks: KsResult, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            params: param_map(params),
            estimate: ks.p_value,
            reference: threshold,
            se: None,
            pass: ks.p_value > threshold,
        }
    }

    /// `|value - reference| <= tol`.
    pub fn exact(name: &str, params: &[(&str, f64)], value: f64, reference: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            params: param_map(params),
            estimate: value,
            reference,
            se: None,
            pass: (value - reference).abs() <= tol,
        }
    }
}

fn param_map(params: &[(&str, f64)]) -> BTreeMap<String, f64> {
    params.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `Sum x_i delta(1/i)`, skipping zero entries.
pub fn embed_ranked(x: &RankedVector) -> Result<AtomMeasure> {
    let atoms = x
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0.0)
        .map(|(i, m)| Atom::new(1.0 / (i + 1) as f64, *m))
        .collect();
    AtomMeasure::new(atoms)
}

/// A PDRM(alpha, theta) measure with none of its atoms drawn yet.
pub fn pdrm_dust(params: Params) -> Result<AtomMeasure> {
    AtomMeasure::with_dust(Vec::new(), vec![Dust { mass: 1.0, alpha: params.alpha(), theta: params.theta() }])
}

/// Normalised Fleming-Viot states at the nondecreasing times `targets`,
/// started from `mu0`. Dust is left undrawn; see [`expected_on`].
pub fn fv_states(
    mu0: &AtomMeasure,
    params: Params,
    targets: &[f64],
    step: f64,
    rng: &mut RngStream,
) -> Result<Vec<AtomMeasure>> {
    let mut out = Vec::with_capacity(targets.len());
    if params.theta() >= 0.0 {
        let mut chain = SsspChain::with_resolution(mu0.clone(), params, Resolution::none())?;
        stream_depoissonized(&mut chain, targets, step, rng, |_, s| {
            out.push(MassState::normalized(s)?);
            Ok(())
        })?;
    } else {
        let mut chain = NegativeThetaChain::new(mu0.clone(), params)?.with_resolution(Resolution::none());
        stream_depoissonized(&mut chain, targets, step, rng, |_, s| {
            out.push(MassState::normalized(&s.to_measure())?);
            Ok(())
        })?;
    }
    Ok(out)
}

/// `q` at the atom masses of `mu`, ignoring dust.
pub fn eval_on(q: &SymPoly, mu: &AtomMeasure) -> f64 {
    let masses: Vec<f64> = mu.atoms().iter().map(|a| a.mass).collect();
    q.eval(&masses)
}

/// Expected value of `q` at the masses of `mu` once its dust is drawn: each
/// dust piece of mass `m` contributes `m` times an independent PD sample.
pub fn expected_on(q: &SymPoly, mu: &AtomMeasure) -> f64 {
    q.terms().map(|(ms, c)| c * expected_product(ms, mu)).sum()
}

/// `E[prod_j q_{m_j}]` over the drawn atoms and the expanded dust.
fn expected_product(ms: &[u32], mu: &AtomMeasure) -> f64 {
    let k = ms.len();
    let atom_sums: Vec<f64> =
        ms.iter().map(|&m| mu.atoms().iter().map(|a| a.mass.powi(m as i32 + 1)).sum()).collect();
    if mu.dust().is_empty() {
        return atom_sums.iter().product();
    }
    let mut total = 0.0;
    // Factors in `mask` are carried by dust, the others by the atoms.
    for mask in 0..(1u32 << k) {
        let on_atoms: f64 = (0..k).filter(|j| mask & (1 << j) == 0).map(|j| atom_sums[j]).product();
        if on_atoms == 0.0 {
            continue;
        }
        let dust_factors: Vec<u32> = (0..k).filter(|j| mask & (1 << j) != 0).map(|j| ms[j]).collect();
        total += on_atoms * dust_product(&dust_factors, mu);
    }
    total
}

/// `E[prod_j D_j]` with `D_j` the `q_{m_j}` sum over all dust pieces. Factors
/// landing in the same piece are grouped by a set partition; distinct groups
/// must land in distinct pieces, which Moebius inversion turns into plain sums.
fn dust_product(ms: &[u32], mu: &AtomMeasure) -> f64 {
    if ms.is_empty() {
        return 1.0;
    }
    let dust = mu.dust();
    let mut total = 0.0;
    for grouping in set_partitions(ms.len()) {
        // g[i][d]: the i-th group carried by piece d.
        let g: Vec<Vec<f64>> = grouping
            .blocks
            .iter()
            .map(|b| {
                let sub: Vec<u32> = b.iter().map(|&j| ms[j]).collect();
                let power: u32 = sub.iter().map(|m| m + 1).sum();
                dust.iter().map(|d| d.mass.powi(power as i32) * pd_power_sum_moment(&sub, d.alpha, d.theta)).collect()
            })
            .collect();
        for merge in set_partitions(g.len()) {
            let mut term = 1.0;
            for c in &merge.blocks {
                let size = c.len();
                let mobius = if size % 2 == 1 { 1.0 } else { -1.0 } * (1..size).product::<usize>() as f64;
                let s: f64 = (0..dust.len()).map(|d| c.iter().map(|&i| g[i][d]).product::<f64>()).sum();
                term *= mobius * s;
            }
            total += term;
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub t: f64,
    pub slope: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeTest {
    pub rows: Vec<SlopeRow>,
    /// Intercept at `t = 0` of the least-squares line through the slopes,
    /// formed per replica so that its standard error is exact.
    pub extrapolated: Estimate,
    /// `2 B q(x)` from the symbolic route.
    pub reference: f64,
    /// No slope differs from zero by two standard errors.
    pub inconclusive: bool,
}

/// Difference quotients `(q(ranked V_t) - q(x)) / t` of the Fleming-Viot
/// process started from the embedding of `x`, for each `t` in the strictly
/// decreasing `t_list`, all read off one path per replica.
pub fn generator_slope_test(
    x: &RankedVector,
    q: &SymPoly,
    params: Params,
    t_list: &[f64],
    step: f64,
    n: usize,
    exec: Exec,
) -> Result<SlopeTest> {
    if t_list.is_empty() || t_list.iter().any(|t| !(*t > 0.0)) || t_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(domain("t_list must be positive and strictly decreasing"));
    }
    if n < 2 {
        return Err(domain("the slope test needs n >= 2"));
    }
    let reference = apply_b_partition(q, params.alpha(), params.theta(), x.entries())?;
    let mu0 = embed_ranked(x)?;
    let q0 = q.eval(x.entries());
    let mut ascending = t_list.to_vec();
    ascending.reverse();
    let weights = intercept_weights(t_list);

    let rows = mc_collect(
        |rng| {
            let states = fv_states(&mu0, params, &ascending, step, rng)?;
            let mut slopes: Vec<f64> = states.iter().zip(&ascending).map(|(s, t)| (expected_on(q, s) - q0) / t).collect();
            slopes.reverse();
            let intercept = slopes.iter().zip(&weights).map(|(s, w)| s * w).sum();
            slopes.push(intercept);
            Ok(slopes)
        },
        n,
        exec,
    )?;
    let cols = super::stats::columns(&rows)?;
    let mut rows_out = Vec::with_capacity(t_list.len());
    for (t, col) in t_list.iter().zip(&cols) {
        rows_out.push(SlopeRow { t: *t, slope: Estimate::from_values(col)? });
    }
    let extrapolated = Estimate::from_values(&cols[t_list.len()])?;
    let inconclusive = rows_out.iter().all(|r| r.slope.mean.abs() < 2.0 * r.slope.se);
    Ok(SlopeTest { rows: rows_out, extrapolated, reference, inconclusive })
}

/// Weights `c_i` with `sum c_i s_i` the least-squares intercept of the points
/// `(t_i, s_i)`; a single point is its own intercept.
pub fn intercept_weights(t: &[f64]) -> Vec<f64> {
    let m = t.len() as f64;
    if t.len() == 1 {
        return vec![1.0];
    }
    let s1: f64 = t.iter().sum();
    let s2: f64 = t.iter().map(|v| v * v).sum();
    let det = m * s2 - s1 * s1;
    t.iter().map(|ti| (s2 - ti * s1) / det).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversibilityTest {
    /// `E[f(V_0) g(V_t)]`.
    pub forward: Estimate,
    /// `E[g(V_0) f(V_t)]`.
    pub backward: Estimate,
    /// Paired difference `forward - backward`.
    pub difference: Estimate,
}

/// Cross moments of `f` and `g` at times 0 and `t` for the Fleming-Viot
/// process started from PDRM(alpha, theta). The start is drawn to the default
/// resolution, since its undrawn part would be revealed by the later path.
pub fn reversibility_test(
    f: &SymPoly,
    g: &SymPoly,
    params: Params,
    t: f64,
    step: f64,
    n: usize,
    exec: Exec,
) -> Result<ReversibilityTest> {
    if !(t >= 0.0) {
        return Err(domain("t must be nonnegative"));
    }
    let dust0 = pdrm_dust(params)?;
    let rows = mc_collect(
        |rng| {
            let mut mu0 = dust0.clone();
            Resolution::default().apply(&mut mu0, rng)?;
            // At t = 0 both moments use the one observed state.
            let targets: &[f64] = if t == 0.0 { &[0.0] } else { &[0.0, t] };
            let states = fv_states(&mu0, params, targets, step, rng)?;
            let (v0, vt) = (&states[0], states.last().expect("one state per target"));
            let fwd = expected_on(f, v0) * expected_on(g, vt);
            let bwd = expected_on(g, v0) * expected_on(f, vt);
            Ok(vec![fwd, bwd, fwd - bwd])
        },
        n,
        exec,
    )?;
    let cols = super::stats::columns(&rows)?;
    Ok(ReversibilityTest {
        forward: Estimate::from_values(&cols[0])?,
        backward: Estimate::from_values(&cols[1])?,
        difference: Estimate::from_values(&cols[2])?,
    })
}
