use flv_core::depoisson::{build_time_change, depoissonize};
use flv_core::ekp::{
    apply_b_direct, apply_b_partition, crp_updown_step, eppf, pd_power_sum_moment, stationary_moment, CrpState, SymPoly,
};
use flv_core::fdiff::wf_path;
use flv_core::kernels::{kernel_step, kernel_step_lazy};
use flv_core::path::GridPath;
use flv_core::pd::{sample_pd, sample_pdip_masses, sample_pdrm, stick_breaking};
use flv_core::specialfn::{bessel_i, KeepProbability};
use flv_core::types::{concatenate, diversity_estimate, ranked};
use flv_core::verify::{eval_on, expected_on};
use flv_core::{Atom, AtomMeasure, IntervalPartition, Params, RankedVector, RngStream};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = (f64, f64)> {
    (0.05f64..0.95).prop_flat_map(|a| (Just(a), (-a + 0.01)..3.0))
}

fn masses(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, 1..max)
}

/// Masses at distinct locations.
fn measure(max: usize) -> impl Strategy<Value = AtomMeasure> {
    masses(max).prop_map(|m| {
        let n = m.len() as f64;
        let atoms = m.iter().enumerate().map(|(i, &x)| Atom::new((i as f64 + 0.5) / n, x)).collect();
        AtomMeasure::new(atoms).unwrap()
    })
}

fn blocks() -> impl Strategy<Value = IntervalPartition> {
    prop::collection::vec(0.001f64..1.0, 0..6).prop_map(|b| IntervalPartition::new(b).unwrap())
}

/// A polynomial with up to three factors per term.
fn sympoly() -> impl Strategy<Value = SymPoly> {
    let term = (-2.0f64..2.0, prop::collection::vec(1u32..4, 0..4));
    prop::collection::vec(term, 1..4).prop_map(|terms| {
        terms.into_iter().fold(SymPoly::zero(), |acc, (c, m)| acc.add(&SymPoly::monomial(c, m).unwrap()))
    })
}

fn simplex_point(max: usize) -> impl Strategy<Value = Vec<f64>> {
    (masses(max), 0.0f64..0.5).prop_map(|(mut m, defect)| {
        let s: f64 = m.iter().sum();
        for x in &mut m {
            *x *= (1.0 - defect) / s;
        }
        m.sort_by(|a, b| b.total_cmp(a));
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bessel_recurrence(v in -2.0f64..2.0, z in 0.1f64..20.0) {
        let (lo, mid, hi) = (bessel_i(v - 1.0, z).unwrap(), bessel_i(v, z).unwrap(), bessel_i(v + 1.0, z).unwrap());
        let scale = lo.abs().max(hi.abs()).max((2.0 * v / z * mid).abs());
        prop_assert!((lo - hi - 2.0 * v / z * mid).abs() <= 1e-9 * scale, "v={v} z={z}");
    }

    #[test]
    fn keep_probability_is_a_probability(alpha in 0.05f64..0.95, b in 1e-6f64..5.0, r in 0.1f64..1e4, frac in 0.0f64..1.0) {
        let keep = KeepProbability::new(alpha).unwrap();
        let p = keep.eval(b, r, frac * b).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn samplers_are_pure((alpha, theta) in params(), seed in any::<u64>(), stream in 0u64..1000) {
        let draw = || sample_pd(alpha, theta, 50, &mut RngStream::new(seed, stream)).unwrap();
        prop_assert_eq!(draw(), draw());
        let p = Params::new(alpha, theta.max(0.0)).unwrap();
        let mu = AtomMeasure::new(vec![Atom::new(0.2, 0.7), Atom::new(0.6, 0.3)]).unwrap();
        let step = || kernel_step(&mu, 0.05, p, &mut RngStream::new(seed, stream)).unwrap();
        prop_assert_eq!(step(), step());
    }

    #[test]
    fn three_pd_samplers_share_sticks((alpha, theta) in params(), seed in any::<u64>()) {
        let pd = sample_pd(alpha, theta, 40, &mut RngStream::new(seed, 0)).unwrap();
        let rm = sample_pdrm(alpha, theta, 40, &mut RngStream::new(seed, 0)).unwrap();
        let ip = sample_pdip_masses(alpha, theta, 40, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(ranked(&rm, false).unwrap().entries().to_vec(), pd.entries());
        prop_assert_eq!(ranked(ip.blocks(), false).unwrap().entries().to_vec(), pd.entries());
    }

    #[test]
    fn residual_shrinks_with_more_sticks((alpha, theta) in params(), seed in any::<u64>(), n in 1usize..200) {
        let p = Params::new(alpha, theta).unwrap();
        let a = stick_breaking(p, n, &mut RngStream::new(seed, 0)).unwrap();
        let b = stick_breaking(p, 2 * n, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert!(b.residual <= a.residual);
    }

    #[test]
    fn ranking_is_idempotent(m in measure(12)) {
        let once = ranked(&m, false).unwrap();
        let twice = ranked(&once.to_measure(), false).unwrap();
        prop_assert_eq!(once.entries(), twice.entries());
    }

    #[test]
    fn ranking_is_lipschitz(m in masses(12), i in any::<prop::sample::Index>(), eps in -0.5f64..0.5) {
        let mut moved = m.clone();
        let k = i.index(m.len());
        moved[k] = (moved[k] + eps).max(0.0);
        let (a, b) = (ranked(&m[..], false).unwrap(), ranked(&moved[..], false).unwrap());
        let gap = a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= eps.abs() + 1e-15);
    }

    #[test]
    fn concatenation_is_a_monoid(a in blocks(), b in blocks(), c in blocks()) {
        let left = concatenate(&[concatenate(&[a.clone(), b.clone()]), c.clone()]);
        let right = concatenate(&[a.clone(), concatenate(&[b, c])]);
        prop_assert_eq!(left.blocks(), right.blocks());
        let e = IntervalPartition::empty();
        prop_assert_eq!(concatenate(&[e.clone(), a.clone()]), a.clone());
        prop_assert_eq!(concatenate(&[a.clone(), e]), a);
    }

    #[test]
    fn diversity_ignores_atom_order(m in masses(20), alpha in 0.05f64..0.95, shift in 0usize..20) {
        let mut rotated = m.clone();
        rotated.rotate_left(shift % m.len());
        let h = [0.5, 0.1, 0.01];
        let a = diversity_estimate(&ranked(&m[..], false).unwrap(), alpha, &h).unwrap();
        let b = diversity_estimate(&ranked(&rotated[..], false).unwrap(), alpha, &h).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn kernel_outputs_are_valid_measures(m in measure(6), (alpha, theta) in params(), s in 0.001f64..1.0, seed in any::<u64>()) {
        let p = Params::new(alpha, theta.max(0.0)).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let next = kernel_step(&m, s, p, &mut rng).unwrap();
        prop_assert!(next.validate().is_ok());
        let lazy = kernel_step_lazy(&m, s, p, &mut rng).unwrap();
        prop_assert!(lazy.validate().is_ok());
        prop_assert!(lazy.dust().iter().all(|d| d.mass > 0.0));
    }

    #[test]
    fn time_change_is_monotone(path in prop::collection::vec(0.05f64..3.0, 2..30), ts in prop::collection::vec(0.0f64..1.0, 1..10)) {
        let times: Vec<f64> = (0..path.len()).map(|i| i as f64 * 0.1).collect();
        let gp = GridPath::from_states(times, path).unwrap();
        let tc = build_time_change(&gp).unwrap();
        prop_assert!(tc.clock_values.windows(2).all(|w| w[0] <= w[1]));
        let mut ts: Vec<f64> = ts.iter().map(|t| t * tc.horizon_t * 0.999).collect();
        ts.sort_by(f64::total_cmp);
        let rho: Vec<f64> = ts.iter().map(|&t| tc.rho(t).unwrap()).collect();
        prop_assert!(rho.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn time_change_commutes_with_ranking(states in prop::collection::vec(measure(5), 2..10), t in 0.0f64..1.0) {
        let times: Vec<f64> = (0..states.len()).map(|i| i as f64 * 0.05).collect();
        let gp = GridPath::from_states(times, states).unwrap();
        let tc = build_time_change(&gp).unwrap();
        let t = t * tc.horizon_t * 0.999;
        let out = depoissonize(&gp, &tc, &[t]).unwrap();
        let j = tc.index_at_or_after(t).unwrap();
        let direct = ranked(&gp.states[j], true).unwrap();
        let via = ranked(&out.states[0], false).unwrap();
        for (x, y) in direct.entries().iter().zip(via.entries()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn wf_stays_on_the_simplex(x in simplex_point(4), seed in any::<u64>()) {
        let mut x = x;
        let rest = 1.0 - x.iter().sum::<f64>();
        x.push(rest);
        let r: Vec<f64> = (0..x.len()).map(|i| 0.3 + 0.1 * i as f64).collect();
        let path = wf_path(&x, &r, 1e-3, 0.05, &mut RngStream::new(seed, 0)).unwrap();
        for w in &path.states {
            prop_assert!(w.iter().all(|c| (0.0..=1.0).contains(c)));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn generator_routes_agree(q in sympoly(), x in simplex_point(4), (alpha, theta) in params()) {
        let two_b = apply_b_partition(&q, alpha, theta, &x).unwrap();
        let direct = 2.0 * apply_b_direct(&q, alpha, theta, &x).unwrap();
        prop_assert!((two_b - direct).abs() <= 1e-10 * direct.abs().max(1.0), "{two_b} vs {direct}");
    }

    #[test]
    fn updown_moves_conserve_customers(sizes in prop::collection::vec(1u32..6, 1..6), (alpha, theta) in params(), seed in any::<u64>()) {
        let mut state = CrpState::new(&sizes).unwrap();
        let n: u32 = sizes.iter().sum();
        let p = Params::new(alpha, theta).unwrap();
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..50 {
            crp_updown_step(&mut state, p, &mut rng).unwrap();
            let now = state.sizes();
            prop_assert_eq!(now.iter().sum::<u32>(), n);
            prop_assert!(now.iter().all(|s| *s > 0));
        }
    }

    #[test]
    fn polynomial_products(p in sympoly(), q in sympoly(), r in sympoly(), x in simplex_point(4)) {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        prop_assert!(close(p.mul(&q).eval(&x), q.mul(&p).eval(&x)));
        prop_assert!(close(p.mul(&q).mul(&r).eval(&x), p.mul(&q.mul(&r)).eval(&x)));
        prop_assert!(close(p.mul(&q).eval(&x), p.eval(&x) * q.eval(&x)));
    }

    #[test]
    fn single_power_sum_moments(m in 1u32..5, (alpha, theta) in params()) {
        let a = pd_power_sum_moment(&[m], alpha, theta);
        let b = stationary_moment(m, alpha, theta).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
    }

    #[test]
    fn partition_probabilities_sum_to_one((alpha, theta) in params()) {
        // All compositions of 4 into ordered block sizes, each unordered partition
        // weighted by its number of set partitions.
        let shapes: [(&[u32], f64); 5] = [(&[4], 1.0), (&[3, 1], 4.0), (&[2, 2], 3.0), (&[2, 1, 1], 6.0), (&[1, 1, 1, 1], 1.0)];
        let total: f64 = shapes.iter().map(|(s, w)| w * eppf(s, alpha, theta)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expectation_without_dust_is_evaluation(m in measure(6), q in sympoly()) {
        let (a, b) = (expected_on(&q, &m), eval_on(&q, &m));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn ranked_vector_rejects_unsorted_input() {
    assert!(RankedVector::new(vec![0.2, 0.5]).is_err());
}
