#include <doctest.h>

#include <cmath>

#include "dendrostate/stats.hpp"
#include "dendrostate/vce.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

using namespace dendrostate;

TEST_SUITE("vce") {

TEST_CASE("constant truth: per-year intervals cover the constant") {
  SynthConfig sc;
  sc.n_trees = 60;
  sc.n_stands = 10;
  sc.n_years = 30;
  sc.p = 2;
  sc.theta = Eigen::Vector2d(-0.3, 0.2);
  sc.seed = 51;
  sc.staggered_recruitment = false;
  auto fx = testutil::make_design(sc);

  VceConfig config;
  config.mcmc.iterations = 500;
  config.mcmc.burn_in = 200;
  config.mcmc.seed = 52;
  VceFit fit = fit_vce(fx.design, config);
  auto rows = summarize_trajectory(fit.chain, fx.design);

  int covered = 0, total = 0;
  for (const auto& row : rows) {
    double truth = row.variable == fx.design.climate_vars[0] ? -0.3 : 0.2;
    ++total;
    if (truth >= row.ci_low && truth <= row.ci_high) ++covered;
  }
  CHECK(total == 60);
  CHECK(static_cast<double>(covered) / total >= 0.9);
}

TEST_CASE("step change is tracked by the posterior mean trajectory") {
  SynthConfig sc;
  sc.n_trees = 80;
  sc.n_stands = 10;
  sc.n_years = 40;
  sc.p = 2;
  sc.theta = Eigen::Vector2d(-0.3, 0.15);
  sc.path = SynthConfig::Path::step;
  sc.step_year_index = 20;
  sc.step_component = 0;
  sc.step_to = -0.9;
  sc.seed = 53;
  sc.staggered_recruitment = false;
  auto fx = testutil::make_design(sc);

  VceConfig config;
  config.mcmc.iterations = 600;
  config.mcmc.burn_in = 250;
  config.mcmc.seed = 54;
  VceFit fit = fit_vce(fx.design, config);
  auto rows = summarize_trajectory(fit.chain, fx.design);

  auto value_at = [&](int t) {
    for (const auto& row : rows) {
      if (row.variable == fx.design.climate_vars[0] &&
          row.year == sc.start_year + t) {
        return row.post_mean;
      }
    }
    FAIL("year not found");
    return 0.0;
  };
  double before = value_at(15);
  double after = value_at(25);
  // The step is -0.6; demand at least 80% of it within +-5 years.
  CHECK(after - before < 0.8 * (-0.6));
}

TEST_CASE("tiny random-walk prior flattens the trajectory") {
  SynthConfig sc;
  sc.n_trees = 30;
  sc.n_stands = 6;
  sc.n_years = 20;
  sc.p = 2;
  sc.seed = 55;
  auto fx = testutil::make_design(sc);

  VceConfig config;
  config.mcmc.iterations = 300;
  config.mcmc.burn_in = 100;
  config.mcmc.seed = 56;
  // Concentrate the noise prior near zero: IG(1e6, 1e-4) has mean 1e-10.
  config.sigma_theta_prior_shape = 1e6;
  config.sigma_theta_prior_rate = 1e-4;
  VceFit fit = fit_vce(fx.design, config);
  Eigen::VectorXd theta_mean = fit.chain.posterior_mean("theta_path");
  // All years nearly identical for each variable.
  for (int v = 0; v < 2; ++v) {
    double first = theta_mean[v];
    for (int t = 1; t < sc.n_years; ++t) {
      CHECK(std::abs(theta_mean[t * 2 + v] - first) < 0.02);
    }
  }
}

TEST_CASE("windowed mode runs and produces finite trajectories") {
  SynthConfig sc;
  sc.n_trees = 30;
  sc.n_stands = 6;
  sc.n_years = 15;
  sc.p = 2;
  sc.seed = 57;
  auto fx = testutil::make_design(sc);
  VceConfig config;
  config.mcmc.iterations = 200;
  config.mcmc.burn_in = 80;
  config.mcmc.seed = 58;
  config.plan.mode = WindowPlan::Mode::windowed;
  VceFit fit = fit_vce(fx.design, config);
  Eigen::VectorXd theta_mean = fit.chain.posterior_mean("theta_path");
  for (Eigen::Index i = 0; i < theta_mean.size(); ++i) CHECK(std::isfinite(theta_mean[i]));
}

TEST_CASE("deterministic given the seed") {
  SynthConfig sc;
  sc.n_trees = 12;
  sc.n_stands = 4;
  sc.n_years = 8;
  sc.p = 2;
  sc.seed = 59;
  auto fx = testutil::make_design(sc, 3);
  VceConfig config;
  config.mcmc.iterations = 40;
  config.mcmc.burn_in = 10;
  config.mcmc.seed = 60;
  VceFit a = fit_vce(fx.design, config);
  VceFit b = fit_vce(fx.design, config);
  CHECK(a.chain.pooled("theta_path", 3) == b.chain.pooled("theta_path", 3));
}

}  // TEST_SUITE
