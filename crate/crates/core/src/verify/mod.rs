//! Statistical harness and acceptance criteria.

mod criteria;
mod harness;
mod stats;

pub use criteria::{
    besq_absorbed_mean, besq_transition_cdf, chapman, crp_stationarity, diversity, generator, interval_coupling,
    jacobi_marginal, laplace_of_l, laplace_transform_l, moments, negative_theta, relocation, reversibility,
    run_all, run_criterion, symbolic_routes, total_mass_law, Config, Criterion, Settings, TITLES,
};
pub use harness::{
    embed_ranked, eval_on, expected_on, fv_states, generator_slope_test, intercept_weights, pdrm_dust, reversibility_test, Report,
    ReversibilityTest, SlopeRow, SlopeTest,
};
pub use stats::{
    columns, kolmogorov_survival, ks_one_sample, ks_two_sample, mc_collect, mc_estimate, mc_estimate_many, Estimate,
    Exec, KsResult,
};
