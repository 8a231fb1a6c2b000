#include <doctest.h>

#include <cmath>

#include "dendrostate/synth.hpp"
#include "test_util.hpp"

using namespace dendrostate;

TEST_SUITE("synth") {

TEST_CASE("degenerate chain: no noise, flat trend, zero theta") {
  SynthConfig sc;
  sc.n_trees = 10;
  sc.n_stands = 2;
  sc.n_years = 12;
  sc.p = 2;
  sc.theta = Eigen::VectorXd::Zero(2);
  sc.sigma2_pe = 0.0;
  sc.phi = 0.0;
  sc.tau2 = 0.0;
  sc.trend = SynthConfig::Trend::flat;
  sc.staggered_recruitment = false;
  sc.seed = 91;
  SynthData data = simulate(sc);
  // The per-tree intercept is still drawn; zero it by construction:
  // flat trend + zero noises leaves width = exp(intercept). Instead check
  // widths constant within each tree across years.
  for (const auto& tree : data.rings) {
    for (double w : tree.widths_mm) CHECK(w == doctest::Approx(tree.widths_mm[0]));
  }
}

TEST_CASE("staggered recruitment: observed trees per year non-decreasing") {
  SynthConfig sc;
  sc.n_trees = 60;
  sc.n_stands = 10;
  sc.n_years = 40;
  sc.seed = 92;
  SynthData data = simulate(sc);
  std::vector<int> counts(40, 0);
  for (const auto& tree : data.rings) {
    for (int y = tree.first_year; y <= tree.last_year(); ++y) {
      counts[static_cast<std::size_t>(y - sc.start_year)]++;
    }
  }
  for (std::size_t t = 1; t < counts.size(); ++t) CHECK(counts[t] >= counts[t - 1]);
  CHECK(counts.back() == 60);
}

TEST_CASE("moment checks across replicates") {
  // Empirical residual variance tracks sigma2/(1-phi^2) and the lag-1
  // autocorrelation tracks phi.
  const int reps = 30;
  double sum_var = 0, sum_rho = 0;
  for (int r = 0; r < reps; ++r) {
    SynthConfig sc;
    sc.n_trees = 60;
    sc.n_stands = 10;
    sc.n_years = 50;
    sc.seed = 500 + static_cast<unsigned>(r);
    sc.staggered_recruitment = false;
    sc.trend = SynthConfig::Trend::flat;
    sc.theta = Eigen::VectorXd::Zero(5);
    sc.tau2 = 0.0;
    SynthData data = simulate(sc);
    // With flat trend, zero theta/tau2, log width = intercept + eps.
    std::vector<double> all;
    double num = 0, den = 0;
    for (const auto& tree : data.rings) {
      std::vector<double> e;
      for (double w : tree.widths_mm) e.push_back(std::log(w));
      double m = testutil::mean_of(e);
      for (auto& x : e) x -= m;
      for (std::size_t t = 0; t < e.size(); ++t) {
        all.push_back(e[t]);
        if (t > 0) {
          num += e[t] * e[t - 1];
          den += e[t - 1] * e[t - 1];
        }
      }
    }
    sum_var += testutil::var_of(all);
    sum_rho += num / den;
  }
  double mean_var = sum_var / reps;
  double mean_rho = sum_rho / reps;
  CHECK(mean_var == doctest::Approx(0.29 / (1 - 0.37 * 0.37)).epsilon(0.05));
  CHECK(mean_rho == doctest::Approx(0.37).epsilon(0.1));
}

TEST_CASE("variance components recorded in the truth record") {
  SynthConfig sc;
  sc.seed = 93;
  SynthData data = simulate(sc);
  CHECK(data.truth.tree_innovation_var == doctest::Approx(0.29).epsilon(0.1));
  CHECK(data.truth.stand_noise_var == doctest::Approx(0.05).epsilon(0.15));
  double ratio = data.truth.tree_innovation_var / data.truth.stand_noise_var;
  CHECK(ratio == doctest::Approx(5.8).epsilon(0.3));
}

TEST_CASE("truth csv and climate table structure") {
  testutil::TempDir dir("synth");
  SynthConfig sc;
  sc.n_trees = 8;
  sc.n_stands = 2;
  sc.n_years = 6;
  sc.seed = 94;
  SynthData data = simulate(sc);
  CHECK(data.climate.rows.size() == 12);
  CHECK(data.climate.variables.size() == 5);
  CHECK(data.climate.variables[2] == "SUM-DEF");
  std::string path = dir.file("truth.csv");
  write_truth_csv(path, sc, data.truth);
  auto text = testutil::read_file(path);
  CHECK(text.find("sigma2_pe") != std::string::npos);
  CHECK(text.find("theta") != std::string::npos);
}

TEST_CASE("step path switches the chosen component") {
  SynthConfig sc;
  sc.n_trees = 4;
  sc.n_stands = 2;
  sc.n_years = 10;
  sc.p = 2;
  sc.path = SynthConfig::Path::step;
  sc.step_year_index = 5;
  sc.step_component = 1;
  sc.step_to = 0.9;
  sc.theta = Eigen::Vector2d(-0.3, 0.2);
  sc.seed = 95;
  SynthData data = simulate(sc);
  CHECK(data.truth.theta_path(4, 1) == doctest::Approx(0.2));
  CHECK(data.truth.theta_path(5, 1) == doctest::Approx(0.9));
  CHECK(data.truth.theta_path(7, 0) == doctest::Approx(-0.3));
}

}  // TEST_SUITE
