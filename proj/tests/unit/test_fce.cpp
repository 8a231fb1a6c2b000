#include <doctest.h>

#include <cmath>

#include "dendrostate/fce.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

using namespace dendrostate;

namespace {

// Minimal hand-built design: one stand, one year, three trees each with a
// single observation, spline trend pinned at zero (B = 0). Lets the alpha
// full conditional be checked against the closed form.
ModelDesign single_cell_design(const std::vector<double>& log_widths, double f_value) {
  ModelDesign d;
  d.window = {2000, 2000};
  d.n_years = 1;
  d.stand_ids = {"S1"};
  d.stand_initiation = {1980};
  d.basis = SplineBasis(0.0, 10.0, {5.0}, 3, 2);
  const int nb = d.basis.n_basis();
  for (std::size_t i = 0; i < log_widths.size(); ++i) {
    d.tree_ids.push_back("T" + std::to_string(i));
    d.tree_species.push_back("ABBA");
    d.tree_recruitment.push_back(1990);
    d.tree_stand.push_back(0);
    ModelDesign::Segment seg;
    seg.tree = static_cast<int>(i);
    seg.stand = 0;
    seg.first_t = 0;
    seg.B = Eigen::MatrixXd::Zero(1, nb);
    seg.log_y = Eigen::VectorXd::Constant(1, log_widths[i]);
    seg.ages = {5.0};
    d.segments.push_back(std::move(seg));
    d.tree_segments.emplace_back(static_cast<int>(i), static_cast<int>(i) + 1);
  }
  d.cells = {{0, 0}};
  d.cell_of = {0};
  d.stand_years = {{0}};
  d.climate_vars = {"V1"};
  d.climate.resize(1, 1);
  d.climate << f_value;
  return d;
}

}  // namespace

TEST_SUITE("fce") {

TEST_CASE("alpha full conditional: precision-weighted average closed form") {
  // phi = 0, no trend: the posterior mean of alpha is the precision
  // weighted combination of the stand-year mean deviation and f'theta.
  std::vector<double> data = {0.6, 0.2, 0.7};
  double f = 0.8;
  ModelDesign d = single_cell_design(data, f);
  FceConfig config;
  config.mcmc.iterations = 2;
  config.mcmc.burn_in = 1;
  config.priors.fix_phi = 0.0;
  FceSampler sampler(d, config);

  FceState state;
  static_cast<GrowthState&>(state) = sampler.core().initial_state();
  state.beta.setZero();
  for (auto& fit : state.fitted) fit.setZero();
  state.theta = Eigen::VectorXd::Constant(1, 1.2);
  state.sigma2_pe = 2.0;
  state.tau2 = 0.5;
  state.phi = 0.0;

  const double n = static_cast<double>(data.size());
  const double dbar = (0.6 + 0.2 + 0.7) / 3.0;
  const double prior_mean = f * 1.2;
  const double expected_mean =
      (n / 2.0 * dbar + (1.0 / 0.5) * prior_mean) / (n / 2.0 + 1.0 / 0.5);
  const double expected_var = 1.0 / (n / 2.0 + 1.0 / 0.5);

  Rng rng(31);
  std::vector<double> draws;
  for (int i = 0; i < 60000; ++i) {
    sampler.core().update_alpha(state, sampler.alpha_prior_mean(state), rng);
    draws.push_back(state.alpha[0]);
  }
  CHECK(testutil::mean_of(draws) == doctest::Approx(expected_mean).epsilon(0.01));
  CHECK(testutil::var_of(draws) == doctest::Approx(expected_var).epsilon(0.03));
}

TEST_CASE("tau2 limits: infinite variance ignores the prior, zero pins it") {
  std::vector<double> data = {0.6, 0.2, 0.7};
  double f = 0.8;
  ModelDesign d = single_cell_design(data, f);
  FceConfig config;
  config.priors.fix_phi = 0.0;
  FceSampler sampler(d, config);
  FceState state;
  static_cast<GrowthState&>(state) = sampler.core().initial_state();
  state.beta.setZero();
  for (auto& fit : state.fitted) fit.setZero();
  state.theta = Eigen::VectorXd::Constant(1, 1.2);
  state.sigma2_pe = 2.0;
  state.phi = 0.0;

  Rng rng(32);
  const double dbar = (0.6 + 0.2 + 0.7) / 3.0;
  state.tau2 = 1e12;  // shrinkage vanishes
  std::vector<double> loose;
  for (int i = 0; i < 40000; ++i) {
    sampler.core().update_alpha(state, sampler.alpha_prior_mean(state), rng);
    loose.push_back(state.alpha[0]);
  }
  CHECK(testutil::mean_of(loose) == doctest::Approx(dbar).epsilon(0.02));

  state.tau2 = 1e-12;  // alpha collapses onto f'theta
  for (int i = 0; i < 100; ++i) {
    sampler.core().update_alpha(state, sampler.alpha_prior_mean(state), rng);
    CHECK(state.alpha[0] == doctest::Approx(0.8 * 1.2).epsilon(1e-3));
  }
}

TEST_CASE("theta update is ordinary Bayesian regression of alpha on F") {
  SynthConfig sc;
  sc.n_trees = 24;
  sc.n_stands = 6;
  sc.n_years = 12;
  sc.p = 2;
  sc.seed = 33;
  auto fx = testutil::make_design(sc, 3);
  FceConfig config;
  FceSampler sampler(fx.design, config);
  FceState state;
  static_cast<GrowthState&>(state) = sampler.core().initial_state();
  state.theta = Eigen::VectorXd::Zero(2);
  state.tau2 = 0.3;

  // Closed form: precision = F'F/tau2 + I/100, mean = precision^{-1} F'alpha/tau2.
  const Eigen::MatrixXd& F = fx.design.climate;
  Eigen::MatrixXd precision = F.transpose() * F / 0.3 + Eigen::MatrixXd::Identity(2, 2) / 100.0;
  Eigen::VectorXd mean_closed = precision.inverse() * (F.transpose() * state.alpha / 0.3);
  Eigen::MatrixXd cov_closed = precision.inverse();

  Rng rng(34);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(2, 2);
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    sampler.update_theta(state, rng);
    sum += state.theta;
    outer += state.theta * state.theta.transpose();
    state.theta = Eigen::VectorXd::Zero(2);  // keep the conditional fixed
  }
  Eigen::VectorXd m = sum / n;
  Eigen::MatrixXd cov = outer / n - m * m.transpose();
  CHECK((m - mean_closed).cwiseAbs().maxCoeff() < 0.01);
  CHECK((cov - cov_closed).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("small synthetic fit: coverage and log-joint improvement") {
  SynthConfig sc;
  sc.n_trees = 40;
  sc.n_stands = 8;
  sc.n_years = 40;
  sc.p = 5;
  sc.seed = 35;
  auto fx = testutil::make_design(sc);

  FceConfig config;
  config.mcmc.iterations = 500;
  config.mcmc.burn_in = 200;
  config.mcmc.seed = 36;
  FceSampler sampler(fx.design, config);
  double lp0 = sampler.log_joint(sampler.initial_state());
  FceFit fit = sampler.fit();

  Eigen::VectorXd truth = sc.default_theta();
  int covered = 0;
  for (int v = 0; v < 5; ++v) {
    auto draws = fit.chain.pooled("theta", v);
    double lo = quantile_linear(draws, 0.025);
    double hi = quantile_linear(draws, 0.975);
    if (truth[v] >= lo && truth[v] <= hi) ++covered;
  }
  CHECK(covered >= 4);

  auto lp_draws = fit.chain.pooled("lp", 0);
  CHECK(testutil::mean_of(lp_draws) > lp0);

  // Posterior means of the variance components land near the truth.
  auto s2 = fit.chain.pooled("sigma2_pe", 0);
  CHECK(testutil::mean_of(s2) == doctest::Approx(sc.sigma2_pe).epsilon(0.25));
}

TEST_CASE("deterministic given the seed") {
  SynthConfig sc;
  sc.n_trees = 12;
  sc.n_stands = 4;
  sc.n_years = 10;
  sc.p = 2;
  sc.seed = 37;
  auto fx = testutil::make_design(sc, 3);
  FceConfig config;
  config.mcmc.iterations = 50;
  config.mcmc.burn_in = 10;
  config.mcmc.seed = 38;
  FceFit a = FceSampler(fx.design, config).fit();
  FceFit b = FceSampler(fx.design, config).fit();
  CHECK(a.chain.pooled("theta", 0) == b.chain.pooled("theta", 0));
  CHECK(a.chain.pooled("phi", 0) == b.chain.pooled("phi", 0));
}

TEST_CASE("theta summary csv") {
  testutil::TempDir dir("fce");
  SynthConfig sc;
  sc.n_trees = 12;
  sc.n_stands = 4;
  sc.n_years = 10;
  sc.p = 2;
  sc.seed = 39;
  auto fx = testutil::make_design(sc, 3);
  FceConfig config;
  config.mcmc.iterations = 260;
  config.mcmc.burn_in = 20;
  config.mcmc.seed = 40;
  FceFit fit = FceSampler(fx.design, config).fit();
  std::string path = dir.file("theta_summary.csv");
  write_theta_summary(path, fit.chain, fx.design.climate_vars);
  auto text = testutil::read_file(path);
  CHECK(text.find("variable,median,q2.5,q97.5") != std::string::npos);
  CHECK(text.find("V01") != std::string::npos);
}

}  // TEST_SUITE
