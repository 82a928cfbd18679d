use flv_core::besq::{besq_transition, time_grid};
use flv_core::depoisson::stream_depoissonized;
use flv_core::ekp::{apply_b_direct, apply_b_partition, crp_updown_step, CrpState, SymPoly};
use flv_core::fdiff::{jacobi_path, wf_path};
use flv_core::kernels::{
    kernel_step, sample_l, sample_q, sssp_grid_path, sssp_negative_theta, IpChain, NegativeThetaChain, SsspChain,
};
use flv_core::path::MassState;
use flv_core::pd::{sample_pd, sample_pdip_masses, sample_pdrm};
use flv_core::verify::{self, embed_ranked, mc_collect, pdrm_dust, Config, Report, Settings};
use flv_core::{AtomMeasure, IntervalPartition, Params, RankedVector, Result, RngStream};
use serde_json::{json, Value};

use crate::output::Table;
use crate::{Ctx, EvalBArgs, Outcome, SampleArgs, SampleKind, SimulateArgs, SimulateKind, VerifyArgs, VerifyKind};

/// Atom locations, atom masses and the undrawn mass.
fn measure_cells(m: &AtomMeasure) -> [Value; 3] {
    [
        json!(m.atoms().iter().map(|a| a.location).collect::<Vec<_>>()),
        json!(m.atoms().iter().map(|a| a.mass).collect::<Vec<_>>()),
        json!(m.dust_mass()),
    ]
}

/// `x` (sorted, largest first) at locations `1/(i+1)`, or a Poisson-Dirichlet
/// random measure when `x` is empty.
fn start_measure(ctx: &Ctx, x: &[f64], params: Params) -> Result<AtomMeasure> {
    if x.is_empty() {
        ctx.note("start", json!("pdrm"));
        return pdrm_dust(params);
    }
    ctx.note("x", json!(x));
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    embed_ranked(&RankedVector::new(sorted)?)
}

fn passed(table: Table) -> Outcome {
    Outcome { table, pass: true }
}

pub fn sample(ctx: &Ctx, a: &SampleArgs) -> Result<Outcome> {
    let exec = ctx.exec();
    let n = ctx.samples_or(1);
    let mut t;
    match a.what {
        SampleKind::Pd | SampleKind::Pdrm | SampleKind::Pdip => {
            let p = ctx.params_or(0.5)?;
            ctx.note("sticks", json!(a.sticks));
            let (alpha, theta) = (p.alpha(), p.theta());
            match a.what {
                SampleKind::Pd => {
                    t = Table::new(&["sample", "masses", "defect"]);
                    let draws = mc_collect(|rng| sample_pd(alpha, theta, a.sticks, rng), n, exec)?;
                    for (i, v) in draws.iter().enumerate() {
                        t.push(vec![json!(i), json!(v.entries()), json!(v.defect())]);
                    }
                }
                SampleKind::Pdrm => {
                    t = Table::new(&["sample", "locations", "masses", "dust_mass"]);
                    let draws = mc_collect(|rng| sample_pdrm(alpha, theta, a.sticks, rng), n, exec)?;
                    for (i, m) in draws.iter().enumerate() {
                        let [loc, mass, dust] = measure_cells(m);
                        t.push(vec![json!(i), loc, mass, dust]);
                    }
                }
                _ => {
                    t = Table::new(&["sample", "blocks"]);
                    let draws = mc_collect(|rng| sample_pdip_masses(alpha, theta, a.sticks, rng), n, exec)?;
                    for (i, b) in draws.iter().enumerate() {
                        t.push(vec![json!(i), json!(b.blocks())]);
                    }
                }
            }
        }
        SampleKind::Besq | SampleKind::L => {
            let s = ctx.time_or(0.1);
            ctx.note("b", json!(a.b));
            let draws = if a.what == SampleKind::Besq {
                let theta = ctx.theta_or(0.5);
                mc_collect(|rng| besq_transition(a.b, 2.0 * theta, s, rng), n, exec)?
            } else {
                let alpha = ctx.alpha();
                mc_collect(|rng| sample_l(a.b, 0.5 / s, alpha, rng), n, exec)?
            };
            t = Table::new(&["sample", "value"]);
            for (i, v) in draws.iter().enumerate() {
                t.push(vec![json!(i), json!(v)]);
            }
        }
        SampleKind::Q | SampleKind::Kernel => {
            let s = ctx.time_or(0.1);
            let draws = if a.what == SampleKind::Q {
                ctx.note("b", json!(a.b));
                let alpha = ctx.alpha();
                mc_collect(|rng| sample_q(a.b, 0.5, 0.5 / s, alpha, rng), n, exec)?
            } else {
                let p = ctx.params_or(0.5)?;
                let mu0 = start_measure(ctx, &a.x, p)?;
                mc_collect(|rng| kernel_step(&mu0, s, p, rng), n, exec)?
            };
            t = Table::new(&["sample", "total_mass", "locations", "masses", "dust_mass"]);
            for (i, m) in draws.iter().enumerate() {
                let [loc, mass, dust] = measure_cells(m);
                t.push(vec![json!(i), json!(m.total_mass()), loc, mass, dust]);
            }
        }
    }
    Ok(passed(t))
}

/// Normalised, time-changed states at `targets`, with dust drawn at the default resolution.
fn fv_path(mu0: &AtomMeasure, p: Params, targets: &[f64], step: f64, rng: &mut RngStream) -> Result<Vec<AtomMeasure>> {
    let mut out = Vec::with_capacity(targets.len());
    if p.theta() >= 0.0 {
        let mut chain = SsspChain::new(mu0.clone(), p)?;
        stream_depoissonized(&mut chain, targets, step, rng, |_, s| {
            out.push(s.normalized()?);
            Ok(())
        })?;
    } else {
        let mut chain = NegativeThetaChain::new(mu0.clone(), p)?;
        stream_depoissonized(&mut chain, targets, step, rng, |_, s| {
            out.push(s.to_measure().normalized()?);
            Ok(())
        })?;
    }
    Ok(out)
}

pub fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<Outcome> {
    let exec = ctx.exec();
    let n = ctx.samples_or(1);
    let mut t;
    match a.what {
        SimulateKind::Sssp => {
            let p = ctx.params_or(0.5)?;
            let (step, horizon) = (ctx.step_or(1e-3), ctx.horizon_or(0.1));
            let mu0 = start_measure(ctx, &a.x, p)?;
            let paths = mc_collect(
                |rng| {
                    if p.theta() < 0.0 {
                        sssp_negative_theta(&mu0, step, horizon, p.alpha(), p.theta(), rng)
                    } else {
                        sssp_grid_path(&mu0, step, horizon, p, rng)
                    }
                },
                n,
                exec,
            )?;
            t = Table::new(&["path", "time", "total_mass", "locations", "masses", "dust_mass"]);
            for (i, path) in paths.iter().enumerate() {
                for (time, m) in path.times.iter().zip(&path.states) {
                    let [loc, mass, dust] = measure_cells(m);
                    t.push(vec![json!(i), json!(time), json!(m.total_mass()), loc, mass, dust]);
                }
            }
        }
        SimulateKind::Fv | SimulateKind::Pdipe => {
            let p = ctx.params_or(0.5)?;
            let (step, every, horizon) = (ctx.step_or(1e-3), ctx.time_or(0.1), ctx.horizon_or(1.0));
            let targets = time_grid(every, horizon)?;
            if a.what == SimulateKind::Fv {
                let mu0 = start_measure(ctx, &a.x, p)?;
                let paths = mc_collect(|rng| fv_path(&mu0, p, &targets, step, rng), n, exec)?;
                t = Table::new(&["path", "time", "locations", "masses", "dust_mass"]);
                for (i, states) in paths.iter().enumerate() {
                    for (time, m) in targets.iter().zip(states) {
                        let [loc, mass, dust] = measure_cells(m);
                        t.push(vec![json!(i), json!(time), loc, mass, dust]);
                    }
                }
            } else {
                let given = if a.x.is_empty() {
                    ctx.note("sticks", json!(a.sticks));
                    None
                } else {
                    ctx.note("x", json!(a.x));
                    Some(IntervalPartition::new(a.x.clone())?)
                };
                let paths = mc_collect(
                    |rng| {
                        let beta0 = match &given {
                            Some(b) => b.clone(),
                            None => sample_pdip_masses(p.alpha(), p.theta(), a.sticks, rng)?,
                        };
                        let mut chain = IpChain::new(beta0, p)?;
                        let mut out = Vec::with_capacity(targets.len());
                        stream_depoissonized(&mut chain, &targets, step, rng, |_, s| {
                            out.push(s.normalized()?);
                            Ok(())
                        })?;
                        Ok(out)
                    },
                    n,
                    exec,
                )?;
                t = Table::new(&["path", "time", "blocks"]);
                for (i, states) in paths.iter().enumerate() {
                    for (time, b) in targets.iter().zip(states) {
                        t.push(vec![json!(i), json!(time), json!(b.blocks())]);
                    }
                }
            }
        }
        SimulateKind::Jacobi | SimulateKind::Wf => {
            let alpha = ctx.alpha();
            let theta = ctx.theta_or(0.5);
            let (step, horizon) = (ctx.step_or(1e-4), ctx.horizon_or(1.0));
            if a.what == SimulateKind::Jacobi {
                let x0 = a.x.first().copied().unwrap_or(0.5);
                let r = a.r.first().copied().unwrap_or(-alpha);
                let r_prime = a.r_prime.unwrap_or(theta + alpha);
                ctx.note("x", json!(x0));
                ctx.note("r", json!([r, r_prime]));
                let paths = mc_collect(|rng| jacobi_path(x0, r, r_prime, step, horizon, rng), n, exec)?;
                t = Table::new(&["path", "time", "value"]);
                for (i, path) in paths.iter().enumerate() {
                    for (time, v) in path.times.iter().zip(&path.states) {
                        t.push(vec![json!(i), json!(time), json!(v)]);
                    }
                }
            } else {
                let x0 = if a.x.is_empty() { vec![0.5, 0.5] } else { a.x.clone() };
                // Each listed atom has parameter -alpha; the last coordinate
                // carries the rest of the population.
                let k = x0.len();
                let r = if a.r.is_empty() {
                    let mut r = vec![-alpha; k.saturating_sub(1)];
                    r.push(theta + (k as f64 - 1.0) * alpha);
                    r
                } else {
                    a.r.clone()
                };
                ctx.note("x", json!(x0));
                ctx.note("r", json!(r));
                let paths = mc_collect(|rng| wf_path(&x0, &r, step, horizon, rng), n, exec)?;
                t = Table::new(&["path", "time", "weights"]);
                for (i, path) in paths.iter().enumerate() {
                    for (time, w) in path.times.iter().zip(&path.states) {
                        t.push(vec![json!(i), json!(time), json!(w)]);
                    }
                }
            }
        }
        SimulateKind::Crp => {
            let p = ctx.params_or(0.5)?;
            let every = a.every.max(1);
            ctx.note("customers", json!(a.customers));
            ctx.note("steps", json!(a.steps));
            ctx.note("every", json!(every));
            let paths = mc_collect(
                |rng| {
                    let mut state = CrpState::single_table(a.customers)?;
                    let mut rows = vec![(0, state.sizes())];
                    for k in 1..=a.steps {
                        crp_updown_step(&mut state, p, rng)?;
                        if k % every == 0 {
                            rows.push((k, state.sizes()));
                        }
                    }
                    Ok(rows)
                },
                n,
                exec,
            )?;
            t = Table::new(&["path", "step", "tables", "largest", "sizes"]);
            for (i, rows) in paths.iter().enumerate() {
                for (k, sizes) in rows {
                    let largest = sizes.iter().max().copied().unwrap_or(0);
                    t.push(vec![json!(i), json!(k), json!(sizes.len()), json!(largest), json!(sizes)]);
                }
            }
        }
    }
    Ok(passed(t))
}

fn report_row(r: &Report) -> Vec<Value> {
    vec![json!(r.name), json!(r.estimate), json!(r.se), json!(r.reference), json!(r.pass), json!(r.params)]
}

pub fn verify(ctx: &Ctx, a: &VerifyArgs) -> Result<Outcome> {
    ctx.note("se_multiple", json!(a.se_multiple));
    ctx.note("ks_threshold", json!(a.ks_threshold));
    if a.what == VerifyKind::All {
        ctx.note("scale", json!(a.scale));
        let mut settings = Settings::new(ctx.exec()).with_scale(a.scale);
        settings.se_multiple = a.se_multiple;
        settings.ks_threshold = a.ks_threshold;
        let mut t = Table::new(&["criterion", "name", "estimate", "se", "reference", "pass", "params"]);
        let mut pass = true;
        for id in 1..=13u8 {
            let c = verify::run_criterion(id, &settings)?;
            eprintln!("{}", c.summary_line());
            pass &= c.pass();
            for r in &c.reports {
                let mut row = vec![json!(id)];
                row.extend(report_row(r));
                t.push(row);
            }
        }
        return Ok(Outcome { table: t, pass });
    }

    // Defaults follow the reference settings of the matching acceptance criterion.
    let (theta, n, time, step) = match a.what {
        VerifyKind::Moments => (0.5, 100_000, 0.1, 2e-3),
        VerifyKind::Totalmass => (0.5, 10_000, 0.3, 1e-3),
        VerifyKind::JacobiMarginal => (0.5, 10_000, 0.1, 1e-3),
        VerifyKind::Chapman => (0.5, 100_000, 0.4, 1e-3),
        VerifyKind::Generator => (0.0, 1_000_000, 0.1, 5e-4),
        VerifyKind::Coupling | VerifyKind::Relocation => (0.5, 100_000, 0.2, 1e-3),
        VerifyKind::Reversibility => (0.5, 100_000, 0.1, 1e-3),
        VerifyKind::Diversity => (0.5, 20, 0.1, 1e-3),
        VerifyKind::Laplace => (0.0, 1_000_000, 0.1, 1e-3),
        VerifyKind::Symbolic => (0.5, 100, 0.1, 1e-3),
        VerifyKind::Negative => (-0.25, 100_000, 0.2, 1e-3),
        VerifyKind::Crp => (0.5, 1_000, 0.1, 1e-3),
        VerifyKind::All => unreachable!(),
    };
    let mut cfg = Config::new(ctx.alpha(), ctx.theta_or(theta), ctx.samples_or(n), ctx.exec());
    cfg.time = ctx.time_or(time);
    cfg.step = ctx.step_or(step);
    cfg.se_multiple = a.se_multiple;
    cfg.ks_threshold = a.ks_threshold;
    let reports = match a.what {
        VerifyKind::Moments => verify::moments(&cfg)?,
        VerifyKind::Totalmass => verify::total_mass_law(&cfg)?,
        VerifyKind::JacobiMarginal => verify::jacobi_marginal(&cfg)?,
        VerifyKind::Chapman => verify::chapman(&cfg)?,
        VerifyKind::Generator => {
            ctx.note("poly", json!(a.poly));
            ctx.note("x", json!(a.x));
            ctx.note("t_list", json!(a.t_list));
            let q: SymPoly = a.poly.parse()?;
            verify::generator(&cfg, &q, &RankedVector::new(a.x.clone())?, &a.t_list)?
        }
        VerifyKind::Coupling => verify::interval_coupling(&cfg)?,
        VerifyKind::Reversibility => verify::reversibility(&cfg)?,
        VerifyKind::Diversity => verify::diversity(&cfg)?,
        VerifyKind::Laplace => verify::laplace_of_l(&cfg)?,
        VerifyKind::Relocation => verify::relocation(&cfg)?,
        VerifyKind::Symbolic => verify::symbolic_routes(&cfg)?,
        VerifyKind::Negative => verify::negative_theta(&cfg, cfg.time)?,
        VerifyKind::Crp => {
            ctx.note("customers", json!(a.customers));
            ctx.note("steps", json!(a.steps));
            verify::crp_stationarity(&cfg, a.customers, a.steps)?
        }
        VerifyKind::All => unreachable!(),
    };
    let mut t = Table::new(&["name", "estimate", "se", "reference", "pass", "params"]);
    let mut pass = true;
    for r in &reports {
        eprintln!("{} {}", if r.pass { "ok  " } else { "FAIL" }, r.name);
        pass &= r.pass;
        t.push(report_row(r));
    }
    Ok(Outcome { table: t, pass: pass && !reports.is_empty() })
}

pub fn eval_b(ctx: &Ctx, a: &EvalBArgs) -> Result<Outcome> {
    let (alpha, theta) = (ctx.alpha(), ctx.theta_or(0.5));
    let q: SymPoly = a.poly.parse()?;
    let x = RankedVector::new(a.x.clone())?;
    let two_b = apply_b_partition(&q, alpha, theta, x.entries())?;
    let direct = 2.0 * apply_b_direct(&q, alpha, theta, x.entries())?;
    let mut t = Table::new(&["poly", "x", "two_b", "two_b_direct"]);
    t.push(vec![json!(q.to_string()), json!(x.entries()), json!(two_b), json!(direct)]);
    Ok(passed(t))
}
