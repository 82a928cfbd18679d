//! The acceptance criteria. Each check is a function of a [`Config`], and
//! [`run_criterion`] runs one criterion at its reference settings.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::{gamma_lr, gamma_ur};

use super::harness::{expected_on, fv_states, generator_slope_test, pdrm_dust, reversibility_test, Report};
use super::stats::{columns, ks_one_sample, ks_two_sample, mc_collect, mc_estimate_many, Estimate, Exec};
use crate::ekp::{
    apply_b_direct, apply_b_partition, crp_sample, crp_updown_step, stationary_moment, updown_transition_law,
    CrpState, SymPoly,
};
use crate::error::{domain, Result};
use crate::fdiff::jacobi_path;
use crate::kernels::{ip_kernel_step, kernel_step_lazy, sample_l, NegativeThetaChain, Params};
use crate::path::MassChain;
use crate::pd::stick_breaking;
use crate::rng::RngStream;
use crate::specialfn::{log_gamma, uniform01};
use crate::types::{diversity_estimate, ranked, Atom, AtomMeasure, IntervalPartition, RankedVector};

/// Settings shared by the checks. `time` is the observation time and `step`
/// the grid step of the superprocess.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Config {
    pub alpha: f64,
    pub theta: f64,
    pub n: usize,
    pub step: f64,
    pub time: f64,
    pub exec: Exec,
    /// Moment checks pass within this many standard errors.
    pub se_multiple: f64,
    /// KS checks pass above this p-value.
    pub ks_threshold: f64,
}

impl Config {
    pub fn new(alpha: f64, theta: f64, n: usize, exec: Exec) -> Self {
        Self { alpha, theta, n, step: 1e-3, time: 0.1, exec, se_multiple: 3.0, ks_threshold: 0.01 }
    }

    pub fn params(&self) -> Result<Params> {
        Params::new(self.alpha, self.theta)
    }

    fn tag(&self) -> Vec<(&'static str, f64)> {
        vec![("alpha", self.alpha), ("theta", self.theta), ("n", self.n as f64), ("time", self.time)]
    }

    fn with(&self, alpha: f64, theta: f64, n: usize, time: f64) -> Self {
        Self { alpha, theta, n, time, ..*self }
    }

    fn forked(&self, label: u64) -> Self {
        Self { exec: self.exec.fork(label), ..*self }
    }
}

/// How the reference settings are scaled for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Settings {
    pub exec: Exec,
    /// Multiplies every replica count (at least 50 replicas are kept).
    pub scale: f64,
    pub se_multiple: f64,
    pub ks_threshold: f64,
}

impl Settings {
    pub fn new(exec: Exec) -> Self {
        Self { exec, scale: 1.0, se_multiple: 3.0, ks_threshold: 0.01 }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    fn n(&self, base: usize) -> usize {
        ((base as f64 * self.scale).round() as usize).max(50)
    }

    fn config(&self, id: u8, alpha: f64, theta: f64, base_n: usize) -> Config {
        let mut cfg = Config::new(alpha, theta, self.n(base_n), self.exec.fork(id as u64));
        cfg.se_multiple = self.se_multiple;
        cfg.ks_threshold = self.ks_threshold;
        cfg
    }
}

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub reports: Vec<Report>,
    pub seconds: f64,
}

impl Criterion {
    pub fn pass(&self) -> bool {
        !self.reports.is_empty() && self.reports.iter().all(|r| r.pass)
    }

    /// `criterion  3 PASS  (12.3 s) title`.
    pub fn summary_line(&self) -> String {
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        format!("criterion {:>2} {verdict} ({:.1} s) {}", self.id, self.seconds, self.title)
    }
}

pub const TITLES: [&str; 13] = [
    "stationary moments of the Fleming-Viot process",
    "total mass follows the squared Bessel transition",
    "single atom mass is a Jacobi diffusion",
    "generator identification by slopes",
    "Chapman-Kolmogorov for the kernel",
    "Laplace transform of L",
    "relocation invariance",
    "interval-partition coupling",
    "symbolic routes agree",
    "negative theta construction",
    "reversibility of the ranked process",
    "diversity estimator",
    "up-down CRP stationarity",
];

/// Runs criterion `id` (1 to 13) at its reference settings.
pub fn run_criterion(id: u8, settings: &Settings) -> Result<Criterion> {
    let start = Instant::now();
    let s = settings;
    let reports = match id {
        1 => {
            let mut out = Vec::new();
            for (k, (alpha, theta)) in [(0.5, 0.5), (0.3, 0.0), (0.5, -0.25)].into_iter().enumerate() {
                let mut cfg = s.config(1, alpha, theta, 100_000).forked(k as u64);
                cfg.step = 2e-3;
                out.extend(moments(&cfg)?);
            }
            out
        }
        2 => total_mass_law(&s.config(2, 0.5, 0.5, 10_000).with(0.5, 0.5, s.n(10_000), 0.3))?,
        3 => jacobi_marginal(&s.config(3, 0.5, 0.5, 10_000))?,
        4 => {
            let mut out = Vec::new();
            let cases = [("q[1]", vec![0.9, 0.1], 0.5, 0.0), ("q[1]q[1]", vec![0.6, 0.4], 0.3, 0.7)];
            for (k, (q, x, alpha, theta)) in cases.into_iter().enumerate() {
                let mut cfg = s.config(4, alpha, theta, 1_000_000).forked(k as u64);
                cfg.step = 5e-4;
                let q: SymPoly = q.parse()?;
                out.extend(generator(&cfg, &q, &RankedVector::new(x)?, &[0.01, 0.005])?);
            }
            out
        }
        5 => chapman(&s.config(5, 0.5, 0.5, 100_000).with(0.5, 0.5, s.n(100_000), 0.4))?,
        6 => laplace_of_l(&s.config(6, 0.5, 0.0, 1_000_000))?,
        7 => relocation(&s.config(7, 0.5, 0.5, 100_000).with(0.5, 0.5, s.n(100_000), 0.2))?,
        8 => interval_coupling(&s.config(8, 0.5, 0.5, 100_000).with(0.5, 0.5, s.n(100_000), 0.2))?,
        9 => symbolic_routes(&s.config(9, 0.5, 0.5, 100))?,
        10 => negative_theta(&s.config(10, 0.5, -0.25, 100_000), 0.2)?,
        11 => reversibility(&s.config(11, 0.5, 0.5, 100_000))?,
        12 => diversity(&s.config(12, 0.5, 0.5, 20))?,
        13 => crp_stationarity(&s.config(13, 0.5, 0.5, 1_000), 200, 1_000_000)?,
        _ => return Err(domain(format!("no criterion {id}"))),
    };
    let mut reports = reports;
    let seconds = start.elapsed().as_secs_f64();
    let budget = match id {
        1 => Some(300.0),
        4 => Some(1800.0),
        _ => None,
    };
    if let Some(limit) = budget {
        let tag = [("scale", s.scale)];
        reports.push(Report { pass: seconds < limit, ..Report::exact("runtime seconds", &tag, seconds, limit, f64::INFINITY) });
    }
    Ok(Criterion { id, title: TITLES[id as usize - 1], reports, seconds })
}

/// Every criterion in order.
pub fn run_all(settings: &Settings) -> Result<Vec<Criterion>> {
    (1..=13).map(|id| run_criterion(id, settings)).collect()
}

/// `E[q_1]` and `E[q_2]` at `time` from a PDRM start against the stationary values.
pub fn moments(cfg: &Config) -> Result<Vec<Report>> {
    let params = cfg.params()?;
    let mu0 = pdrm_dust(params)?;
    let (q1, q2) = (SymPoly::power_sum(1)?, SymPoly::power_sum(2)?);
    let est = mc_estimate_many(
        |rng| {
            let v = fv_states(&mu0, params, &[cfg.time], cfg.step, rng)?;
            Ok(vec![expected_on(&q1, &v[0]), expected_on(&q2, &v[0])])
        },
        cfg.n,
        cfg.exec,
    )?;
    let mut out = Vec::new();
    for (m, e) in (1..=2u32).zip(est) {
        let reference = stationary_moment(m, cfg.alpha, cfg.theta)?;
        out.push(Report::moment(&format!("E[q_{m}]"), &cfg.tag(), e, reference, cfg.se_multiple));
    }
    Ok(out)
}

/// `P(Z_s <= y)` for the squared Bessel process of dimension `2 theta > 0`
/// started at `x`: a Poisson(`x r`) mixture of Gamma(`theta + k`, `r`) laws
/// with `r = 1/(2s)`.
pub fn besq_transition_cdf(x: f64, theta: f64, s: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let r = 0.5 / s;
    let mean = x * r;
    let k_max = (mean + 20.0 * mean.sqrt() + 40.0).ceil() as u64;
    let mut total = 0.0;
    for k in 0..=k_max {
        let kf = k as f64;
        let log_pmf = kf * mean.ln() - mean - log_gamma(kf + 1.0).map_or(f64::INFINITY, |v| v.0);
        total += log_pmf.exp() * gamma_lr(theta + kf, r * y);
    }
    total.min(1.0)
}

/// One kernel step of length `time` from a unit atom; KS of the total mass
/// against [`besq_transition_cdf`].
pub fn total_mass_law(cfg: &Config) -> Result<Vec<Report>> {
    let params = cfg.params()?;
    let mu = AtomMeasure::dirac(0.5, 1.0)?;
    let sample = mc_collect(|rng| Ok(kernel_step_lazy(&mu, cfg.time, params, rng)?.total_mass()), cfg.n, cfg.exec)?;
    let ks = ks_one_sample(&sample, |y| besq_transition_cdf(1.0, cfg.theta, cfg.time, y))?;
    Ok(vec![Report::ks("total mass KS", &cfg.tag(), ks, cfg.ks_threshold)])
}

/// Sample variance with the standard error `sqrt((m4 - var^2) / n)`.
fn variance_estimate(values: &[f64]) -> Result<Estimate> {
    let e = Estimate::from_values(values)?;
    let n = values.len() as f64;
    let var = values.iter().map(|v| (v - e.mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = values.iter().map(|v| (v - e.mean).powi(4)).sum::<f64>() / n;
    Ok(Estimate { mean: var, se: ((m4 - var * var).max(0.0) / n).sqrt(), n: values.len() })
}

/// `a` with the standard errors of `a` and `b` combined.
fn against(a: Estimate, b: Estimate) -> Estimate {
    Estimate { se: a.se.hypot(b.se), ..a }
}

/// Mass of the heavier atom of `0.9 delta + 0.1 delta` under the Fleming-Viot
/// process, against an Euler simulation of its Jacobi diffusion.
pub fn jacobi_marginal(cfg: &Config) -> Result<Vec<Report>> {
    let params = cfg.params()?;
    let home = 1.0;
    let mu0 = AtomMeasure::new(vec![Atom::new(home, 0.9), Atom::new(0.5, 0.1)])?;
    let fv = mc_collect(
        |rng| Ok(fv_states(&mu0, params, &[cfg.time], cfg.step, rng)?[0].mass_at(home)),
        cfg.n,
        cfg.exec.fork(1),
    )?;
    let (r, r_prime) = (-cfg.alpha, cfg.theta + cfg.alpha);
    let oracle = mc_collect(
        |rng| Ok(jacobi_path(0.9, r, r_prime, 1e-4, cfg.time, rng)?.final_value()),
        10 * cfg.n,
        cfg.exec.fork(2),
    )?;
    let (m_fv, m_or) = (Estimate::from_values(&fv)?, Estimate::from_values(&oracle)?);
    let (v_fv, v_or) = (variance_estimate(&fv)?, variance_estimate(&oracle)?);
    Ok(vec![
        Report::moment("atom mass mean", &cfg.tag(), against(m_fv, m_or), m_or.mean, cfg.se_multiple),
        Report::moment("atom mass variance", &cfg.tag(), against(v_fv, v_or), v_or.mean, cfg.se_multiple),
    ])
}

/// Extrapolated slope of `q` at `x` against `2 B q(x)`.
pub fn generator(cfg: &Config, q: &SymPoly, x: &RankedVector, t_list: &[f64]) -> Result<Vec<Report>> {
    let params = cfg.params()?;
    let test = generator_slope_test(x, q, params, t_list, cfg.step, cfg.n, cfg.exec)?;
    let mut tag = cfg.tag();
    tag.retain(|(k, _)| *k != "time");
    for (i, &xi) in x.entries().iter().enumerate() {
        tag.push((["x1", "x2", "x3", "x4"].get(i).copied().unwrap_or("x"), xi));
    }
    let mut out: Vec<Report> = test
        .rows
        .iter()
        .map(|row| {
            let mut r = Report::moment(&format!("slope of {q} at t={}", row.t), &tag, row.slope, test.reference, f64::INFINITY);
            r.pass = true;
            r
        })
        .collect();
    let name = if test.inconclusive { format!("extrapolated slope of {q} (inconclusive)") } else { format!("extrapolated slope of {q}") };
    out.push(Report::moment(&name, &tag, test.extrapolated, test.reference, cfg.se_multiple));
    Ok(out)
}

/// Total and largest mass after `kernel_step_lazy`, with the largest atom
/// drawn exactly from the dust.
fn step_masses(mu: &AtomMeasure, steps: &[f64], params: Params, rng: &mut RngStream) -> Result<[f64; 2]> {
    let mut m = mu.clone();
    for &s in steps {
        m = kernel_step_lazy(&m, s, params, rng)?;
    }
    let largest = m.resolve_largest(rng)?.map_or(0.0, |a| a.mass);
    Ok([m.total_mass(), largest])
}

fn two_sample_reports(cfg: &Config, label: &str, a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<Vec<Report>> {
    let mut out = Vec::new();
    for (j, what) in ["total mass", "largest mass"].iter().enumerate() {
        let xa: Vec<f64> = a.iter().map(|v| v[j]).collect();
        let xb: Vec<f64> = b.iter().map(|v| v[j]).collect();
        out.push(Report::ks(&format!("{label}: {what} KS"), &cfg.tag(), ks_two_sample(&xa, &xb)?, cfg.ks_threshold));
    }
    Ok(out)
}

/// One step of `time` against two steps of `time / 2` from a unit atom.
pub fn chapman(cfg: &Config) -> Result<Vec<Report>> {
    let params = cfg.params()?;
    let mu = AtomMeasure::dirac(0.5, 1.0)?;
    let s = cfg.time;
    let one = mc_collect(|rng| step_masses(&mu, &[s], params, rng), cfg.n, cfg.exec.fork(1))?;
    let two = mc_collect(|rng| step_masses(&mu, &[0.5 * s, 0.5 * s], params, rng), cfg.n, cfg.exec.fork(2))?;
    two_sample_reports(cfg, "one step vs two", &one, &two)
}

/// `E[exp(-lambda L)]` for the law of L with parameters `b`, `r`, `alpha`.
pub fn laplace_transform_l(b: f64, r: f64, alpha: f64, lambda: f64) -> f64 {
    let ratio = r / (r + lambda);
    ratio.powf(-alpha) * (b * r * ratio).exp_m1() / (b * r).exp_m1()
}

/// Monte Carlo transform of L at `b = r = 1` for four values of lambda, all
/// from the same draws.
pub fn laplace_of_l(cfg: &Config) -> Result<Vec<Report>> {
    let lambdas: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
    let est = mc_estimate_many(
        |rng| {
            let l = sample_l(1.0, 1.0, cfg.alpha, rng)?;
            Ok(lambdas.iter().map(|lam| (-lam * l).exp()).collect())
        },
        cfg.n,
        cfg.exec,
    )?;
    Ok(lambdas
        .iter()
        .zip(est)
        .map(|(&lam, e)| {
            let reference = laplace_transform_l(1.0, 1.0, cfg.alpha, lam);
            let tag = [("alpha", cfg.alpha), ("b", 1.0), ("r", 1.0), ("lambda", lam), ("n", cfg.n as f64)];
            Report::moment(&format!("E[exp(-{lam} L)]"), &tag, e, reference, cfg.se_multiple)
        })
        .collect())
}

/// The same masses at different locations give the same ranked law.
pub fn relocation(cfg: &Config) -> Result<Vec<Report>> {
    let params = cfg.params()?;
    let a = AtomMeasure::new(vec![Atom::new(0.2, 0.7), Atom::new(0.9, 0.3)])?;
    let b = AtomMeasure::new(vec![Atom::new(0.5, 0.7), Atom::new(0.1, 0.3)])?;
    let xa = mc_collect(|rng| step_masses(&a, &[cfg.time], params, rng), cfg.n, cfg.exec.fork(1))?;
    let xb = mc_collect(|rng| step_masses(&b, &[cfg.time], params, rng), cfg.n, cfg.exec.fork(2))?;
    let la: Vec<f64> = xa.iter().map(|v| v[1]).collect();
    let lb: Vec<f64> = xb.iter().map(|v| v[1]).collect();
    Ok(vec![Report::ks("relocated start: largest mass KS", &cfg.tag(), ks_two_sample(&la, &lb)?, cfg.ks_threshold)])
}

/// Interval-partition kernel against the measure kernel from matching states.
pub fn interval_coupling(cfg: &Config) -> Result<Vec<Report>> {
    let params = cfg.params()?;
    let beta = IntervalPartition::new(vec![0.7, 0.3])?;
    let mu = AtomMeasure::new(vec![Atom::new(0.2, 0.7), Atom::new(0.9, 0.3)])?;
    let ip = mc_collect(
        |rng| {
            let out = ip_kernel_step(&beta, cfg.time, params, rng)?;
            let v = ranked(&out, false)?;
            Ok([v.sum(), v.largest()])
        },
        cfg.n,
        cfg.exec.fork(1),
    )?;
    let measure = mc_collect(|rng| step_masses(&mu, &[cfg.time], params, rng), cfg.n, cfg.exec.fork(2))?;
    two_sample_reports(cfg, "interval partition vs measure", &ip, &measure)
}

/// Partition route against twice the direct route on `cfg.n` random
/// instances with at most three factors; also times the batch.
pub fn symbolic_routes(cfg: &Config) -> Result<Vec<Report>> {
    let start = Instant::now();
    let mut rng = RngStream::new(cfg.exec.seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.n {
        let alpha = 0.05 + 0.9 * uniform01(&mut rng);
        let theta = -alpha + 0.01 + 3.0 * uniform01(&mut rng);
        let len = rng.random_range(1..=5usize);
        let mut x: Vec<f64> = (0..len).map(|_| uniform01(&mut rng) + 1e-3).collect();
        let scale = (0.5 + 0.5 * uniform01(&mut rng)) / x.iter().sum::<f64>();
        x.iter_mut().for_each(|v| *v *= scale);
        x.sort_unstable_by(|a, b| b.total_cmp(a));
        let mut q = SymPoly::zero();
        for _ in 0..rng.random_range(1..=3usize) {
            let k = rng.random_range(1..=3usize);
            let multiset = (0..k).map(|_| rng.random_range(1..=4u32)).collect();
            q = q.add(&SymPoly::monomial(2.0 * uniform01(&mut rng) - 1.0, multiset)?);
        }
        let a = apply_b_partition(&q, alpha, theta, &x)?;
        let b = 2.0 * apply_b_direct(&q, alpha, theta, &x)?;
        worst = worst.max((a - b).abs() / b.abs().max(1.0));
    }
    let secs = start.elapsed().as_secs_f64();
    let tag = [("instances", cfg.n as f64)];
    Ok(vec![
        Report::exact("largest relative discrepancy", &tag, worst, 0.0, 1e-10),
        Report { pass: secs < 1.0, ..Report::exact("runtime seconds", &tag, secs, 1.0, f64::INFINITY) },
    ])
}

/// `E[Z_s]` for the squared Bessel process of dimension `2 theta < 0` started
/// at `x` and absorbed at zero. The hitting time of zero is `x / (2 G)` with
/// `G ~ Gamma(1 - theta)`, so `E[Z_s] = x + 2 theta E[min(s, T)]`.
pub fn besq_absorbed_mean(x: f64, theta: f64, s: f64) -> f64 {
    // E[min(s, T)] = int_0^s P(G < x/(2u)) du by Simpson's rule.
    let n = 4000;
    let h = s / n as f64;
    let f = |u: f64| if u == 0.0 { 1.0 } else { 1.0 - gamma_ur(1.0 - theta, x / (2.0 * u)) };
    let mut acc = f(0.0) + f(s);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    x + 2.0 * theta * acc * h / 3.0
}

/// Negative `theta`: mean total mass at `s` from a unit atom, and `E[q_1]`
/// at `cfg.time` from a PDRM start with `cfg.n / 5` replicas.
pub fn negative_theta(cfg: &Config, s: f64) -> Result<Vec<Report>> {
    let params = cfg.params()?;
    let unit = AtomMeasure::dirac(0.5, 1.0)?;
    let mass = mc_collect(
        |rng| {
            let mut chain = NegativeThetaChain::new(unit.clone(), params)?;
            chain.advance(s, rng)?;
            Ok(chain.total_mass())
        },
        cfg.n,
        cfg.exec.fork(1),
    )?;
    let e = Estimate::from_values(&mass)?;
    let mut tag = cfg.tag();
    tag.push(("s", s));
    let mut out = vec![
        Report::moment("E[total mass], linear mean", &tag, e, 1.0 + 2.0 * cfg.theta * s, cfg.se_multiple),
        Report::moment("E[total mass], absorbed mean", &tag, e, besq_absorbed_mean(1.0, cfg.theta, s), cfg.se_multiple),
    ];
    let mu0 = pdrm_dust(params)?;
    let q1 = SymPoly::power_sum(1)?;
    let m = mc_collect(
        |rng| Ok(expected_on(&q1, &fv_states(&mu0, params, &[cfg.time], cfg.step, rng)?[0])),
        (cfg.n / 5).max(50),
        cfg.exec.fork(2),
    )?;
    let reference = stationary_moment(1, cfg.alpha, cfg.theta)?;
    out.push(Report::moment("E[q_1]", &cfg.tag(), Estimate::from_values(&m)?, reference, cfg.se_multiple));
    Ok(out)
}

/// `E[q_1(V_0) q_2(V_t)] - E[q_2(V_0) q_1(V_t)]` against zero.
pub fn reversibility(cfg: &Config) -> Result<Vec<Report>> {
    let params = cfg.params()?;
    let q1 = SymPoly::power_sum(1)?;
    let q2 = SymPoly::power_sum(2)?;
    let test = reversibility_test(&q1, &q2, params, cfg.time, cfg.step, cfg.n, cfg.exec)?;
    Ok(vec![Report::moment("paired difference of cross moments", &cfg.tag(), test.difference, 0.0, cfg.se_multiple)])
}

/// Number of blocks among `n` points thrown on the sticks, with the points in
/// the unbroken remainder seated by the restaurant of the remainder.
fn paintbox_blocks(weights: &[f64], residual_params: Params, n: usize, rng: &mut RngStream) -> Result<usize> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let mut hit = vec![false; weights.len()];
    let (mut blocks, mut in_residual) = (0, 0u32);
    for _ in 0..n {
        let u = uniform01(rng);
        let i = cumulative.partition_point(|c| *c <= u);
        if i == weights.len() {
            in_residual += 1;
        } else if !hit[i] {
            hit[i] = true;
            blocks += 1;
        }
    }
    if in_residual > 0 {
        blocks += crp_sample(in_residual, residual_params, rng)?.num_tables();
    }
    Ok(blocks)
}

/// The estimator on `x_i = 6 / (pi i)^2`, and on `cfg.n` PD samples against
/// the block counts of one million paintbox points.
pub fn diversity(cfg: &Config) -> Result<Vec<Report>> {
    let alpha = 0.5;
    let c = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
    let x = RankedVector::from_masses((1..=2_000_000u64).map(|i| c / (i * i) as f64).collect(), 0.0);
    let value = diversity_estimate(&x, alpha, &[1e-8])?[0].1;
    let reference = (6.0 / std::f64::consts::PI).sqrt();
    let mut out = vec![Report::exact("inverse-square sequence", &[("alpha", alpha), ("h", 1e-8)], value, reference, 0.01 * reference)];

    let params = cfg.params()?;
    let n_points = 1_000_000usize;
    let sticks = 100_000usize;
    let rows = mc_collect(
        |rng| {
            let st = stick_breaking(params, sticks, rng)?;
            let v = RankedVector::from_masses(st.weights.clone(), st.residual);
            let est = diversity_estimate(&v, cfg.alpha, &[1e-6])?[0].1;
            let rest = Params::new(cfg.alpha, cfg.theta + st.weights.len() as f64 * cfg.alpha)?;
            let k = paintbox_blocks(&st.weights, rest, n_points, rng)?;
            Ok(vec![est, k as f64 / (n_points as f64).powf(cfg.alpha)])
        },
        cfg.n,
        cfg.exec,
    )?;
    let cols = columns(&rows)?;
    let (est, oracle) = (Estimate::from_values(&cols[0])?, Estimate::from_values(&cols[1])?);
    let mut tag = cfg.tag();
    tag.push(("h", 1e-6));
    tag.retain(|(k, _)| *k != "time");
    out.push(Report::exact("PD samples against block counts", &tag, est.mean, oracle.mean, 0.1 * oracle.mean));
    Ok(out)
}

/// Largest table after `steps` up-down moves from one table of `customers`,
/// against direct CRP samples (ten times as many); the exact stationary law
/// of the two-customer chain; and its long-run frequency on one chain.
pub fn crp_stationarity(cfg: &Config, customers: u32, steps: usize) -> Result<Vec<Report>> {
    let params = cfg.params()?;
    let chain = mc_collect(
        |rng| {
            let mut s = CrpState::single_table(customers)?;
            for _ in 0..steps {
                crp_updown_step(&mut s, params, rng)?;
            }
            Ok(s.largest() as f64)
        },
        cfg.n,
        cfg.exec.fork(1),
    )?;
    let direct = mc_collect(|rng| Ok(crp_sample(customers, params, rng)?.largest() as f64), 10 * cfg.n, cfg.exec.fork(2))?;
    let mut tag = vec![("alpha", cfg.alpha), ("theta", cfg.theta), ("customers", customers as f64), ("steps", steps as f64)];
    tag.push(("replicas", cfg.n as f64));
    let mut out = vec![Report::ks("largest table KS", &tag, ks_two_sample(&chain, &direct)?, cfg.ks_threshold)];

    // Two customers: states (2) and (1,1).
    let law = |sizes: &[u32], to: &[u32]| -> Result<f64> {
        let l = updown_transition_law(&CrpState::new(sizes)?, params)?;
        Ok(l.iter().find(|(k, _)| k == to).map_or(0.0, |x| x.1))
    };
    let split = law(&[2], &[1, 1])?;
    let merge = law(&[1, 1], &[2])?;
    let stationary = split / (split + merge);
    let closed = (cfg.theta + cfg.alpha) / (1.0 + cfg.theta);
    let tag2 = [("alpha", cfg.alpha), ("theta", cfg.theta), ("customers", 2.0)];
    out.push(Report::exact("two customers: exact P(two tables)", &tag2, stationary, closed, 1e-12));

    let mut rng = RngStream::new(cfg.exec.fork(3).seed, 0);
    let mut s = CrpState::single_table(2)?;
    let batches = 1000;
    let batch_len = (steps / batches).max(1);
    let mut means = Vec::with_capacity(batches);
    for _ in 0..batches {
        let mut hits = 0usize;
        for _ in 0..batch_len {
            crp_updown_step(&mut s, params, &mut rng)?;
            hits += usize::from(s.num_tables() == 2);
        }
        means.push(hits as f64 / batch_len as f64);
    }
    let freq = Estimate::from_values(&means)?;
    out.push(Report::moment("two customers: long-run frequency", &tag2, freq, stationary, cfg.se_multiple));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besq::besq_negative_path;

    #[test]
    fn laplace_closed_form_values() {
        assert!((laplace_transform_l(1.0, 1.0, 0.5, 1.0) - 0.53393).abs() < 1e-5);
        assert!((laplace_transform_l(2.0, 0.7, 0.3, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn besq_cdf_limits_and_mean() {
        let (x, theta, s) = (1.0, 0.5, 0.3);
        assert_eq!(besq_transition_cdf(x, theta, s, 0.0), 0.0);
        assert!((besq_transition_cdf(x, theta, s, 50.0) - 1.0).abs() < 1e-12);
        // Mean x + 2 theta s from the CDF by quadrature.
        let h = 1e-3;
        let mean: f64 = (0..50_000).map(|i| h * (1.0 - besq_transition_cdf(x, theta, s, (i as f64 + 0.5) * h))).sum();
        assert!((mean - (x + 2.0 * theta * s)).abs() < 1e-4, "{mean}");
    }

    #[test]
    fn absorbed_mean_against_euler() {
        // Dimension -0.5 is BESQ(-2 alpha) with alpha = 0.25.
        let exact = besq_absorbed_mean(1.0, -0.25, 0.2);
        assert!(exact > 0.9 && exact < 0.91);
        let n = 40_000;
        let vals: Vec<f64> = (0..n)
            .map(|i| besq_negative_path(1.0, 0.25, 1e-4, 0.2, &mut RngStream::new(8, i)).unwrap().final_value())
            .collect();
        let e = Estimate::from_values(&vals).unwrap();
        assert!(e.within(exact, 4.0), "{e:?} vs {exact}");
    }

    #[test]
    fn symbolic_criterion_passes() {
        let cfg = Config::new(0.5, 0.5, 100, Exec::sequential(1));
        let reports = symbolic_routes(&cfg).unwrap();
        assert!(reports[0].pass, "{reports:?}");
    }

    #[test]
    fn two_customer_exact_law() {
        let cfg = Config::new(0.5, 0.5, 50, Exec::sequential(2));
        let reports = crp_stationarity(&cfg, 5, 200).unwrap();
        assert!((reports[1].estimate - 2.0 / 3.0).abs() < 1e-12);
        assert!(reports[1].pass);
    }

    #[test]
    fn unknown_criterion() {
        assert!(run_criterion(14, &Settings::new(Exec::sequential(1))).is_err());
    }
}
