#include <doctest.h>

#include <cmath>
#include <random>

#include "dendrostate/chain.hpp"
#include "dendrostate/conjugate.hpp"
#include "dendrostate/errors.hpp"
#include "test_util.hpp"

using namespace dendrostate;

TEST_SUITE("sampler_core") {

TEST_CASE("conjugate normal: one observation") {
  // Prior N(0,1), one observation 2 with unit noise: posterior N(1, 0.5).
  Rng rng(1);
  std::vector<GaussianObs> obs = {{2.0, 1.0}};
  std::vector<double> draws;
  for (int i = 0; i < 100000; ++i) {
    draws.push_back(sample_normal_conjugate(0.0, 1.0, obs, rng));
  }
  CHECK(testutil::mean_of(draws) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(testutil::var_of(draws) == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("conjugate normal: degenerate and prior-only cases") {
  Rng rng(2);
  std::vector<GaussianObs> obs = {{2.0, 1.0}};
  double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10; ++i) {
    CHECK(sample_normal_conjugate(0.7, inf, obs, rng) == 0.7);
  }
  std::vector<double> prior_draws;
  for (int i = 0; i < 50000; ++i) {
    prior_draws.push_back(sample_normal_conjugate(0.5, 4.0, {}, rng));
  }
  CHECK(testutil::mean_of(prior_draws) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(testutil::var_of(prior_draws) == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("inverse gamma moments and validation") {
  Rng rng(3);
  std::vector<double> a, b;
  for (int i = 0; i < 100000; ++i) {
    a.push_back(sample_inverse_gamma(3.0, 2.0, rng));
    b.push_back(sample_inverse_gamma(101.0, 100.0, rng));
  }
  CHECK(testutil::mean_of(a) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(testutil::mean_of(b) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(testutil::var_of(b) == doctest::Approx(0.0101010101).epsilon(0.1));
  CHECK_THROWS_AS(sample_inverse_gamma(0.0, 1.0, rng), NumericError);
  CHECK_THROWS_AS(sample_inverse_gamma(1.0, -2.0, rng), NumericError);
}

TEST_CASE("mvn precision draw matches closed form") {
  Rng rng(4);
  Eigen::MatrixXd P(2, 2);
  P << 4.0, 1.0, 1.0, 3.0;
  Eigen::VectorXd b(2);
  b << 2.0, -1.0;
  Eigen::VectorXd mean_closed = P.inverse() * b;
  Eigen::MatrixXd cov_closed = P.inverse();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(2, 2);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd d = sample_mvn_precision(P, b, rng);
    sum += d;
    outer += d * d.transpose();
  }
  Eigen::VectorXd m = sum / n;
  Eigen::MatrixXd cov = outer / n - m * m.transpose();
  CHECK((m - mean_closed).cwiseAbs().maxCoeff() < 0.01);
  CHECK((cov - cov_closed).cwiseAbs().maxCoeff() < 0.01);
  Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(sample_mvn_precision(bad, b, rng), NumericError);
}

TEST_CASE("phi sampler: white noise concentrates near zero") {
  Rng rng(5);
  std::vector<double> run(20000);
  for (auto& e : run) e = rng.normal();
  Ar1SuffStats stats;
  stats.add_run(run);
  double phi = 0.5;
  std::vector<double> draws;
  for (int i = 0; i < 3000; ++i) {
    phi = sample_phi_ar1(stats, 1.0, phi, rng, 0.05, 2);
    if (i >= 500) draws.push_back(phi);
  }
  CHECK(std::abs(testutil::mean_of(draws)) < 0.05);
}

TEST_CASE("phi sampler: recovers 0.37 from a synthetic AR1 series") {
  Rng rng(6);
  const double true_phi = 0.37;
  const double sigma2 = 1.3;
  std::vector<double> run(10000);
  run[0] = std::sqrt(sigma2 / (1 - true_phi * true_phi)) * rng.normal();
  for (std::size_t t = 1; t < run.size(); ++t) {
    run[t] = true_phi * run[t - 1] + std::sqrt(sigma2) * rng.normal();
  }
  Ar1SuffStats stats;
  stats.add_run(run);
  double phi = 0.0;
  std::vector<double> draws;
  for (int i = 0; i < 6000; ++i) {
    phi = sample_phi_ar1(stats, sigma2, phi, rng, 0.04, 2);
    if (i >= 1000) draws.push_back(phi);
  }
  CHECK(testutil::mean_of(draws) == doctest::Approx(true_phi).epsilon(0.14));
  CHECK(std::abs(testutil::mean_of(draws) - true_phi) < 0.05);
  for (double d : draws) {
    CHECK(d > -1.0);
    CHECK(d < 1.0);
  }
}

TEST_CASE("phi sampler: two-point series stays stable") {
  Rng rng(7);
  Ar1SuffStats stats;
  stats.add_run(std::vector<double>{0.4, -0.2});
  double phi = 0.0;
  for (int i = 0; i < 1000; ++i) {
    phi = sample_phi_ar1(stats, 1.0, phi, rng, 0.3, 2);
    CHECK(std::abs(phi) < 1.0);
  }
}

TEST_CASE("diagnostics: iid draws") {
  Rng rng(8);
  Eigen::VectorXd draws(1000);
  for (Eigen::Index i = 0; i < draws.size(); ++i) draws[i] = rng.normal();
  Diagnostics d = compute_diagnostics({draws});
  CHECK(d.rhat >= 1.0);
  CHECK(d.rhat < 1.01);
  CHECK(d.ess <= 1000.0);
  CHECK(d.ess > 600.0);
}

TEST_CASE("diagnostics: duplicated halves and disjoint constants") {
  Rng rng(9);
  Eigen::VectorXd half(300);
  for (Eigen::Index i = 0; i < half.size(); ++i) half[i] = rng.normal();
  Diagnostics dup = compute_diagnostics({half, half});
  CHECK(dup.rhat < 1.02);
  Eigen::VectorXd c1 = Eigen::VectorXd::Constant(300, 1.0);
  Eigen::VectorXd c2 = Eigen::VectorXd::Constant(300, 2.0);
  Diagnostics disjoint = compute_diagnostics({c1, c2});
  CHECK(std::isinf(disjoint.rhat));
}

TEST_CASE("diagnostics: insufficient draws") {
  Eigen::VectorXd tiny(50);
  tiny.setZero();
  CHECK_THROWS_AS(compute_diagnostics({tiny}), ConfigError);
}

TEST_CASE("chain storage, summaries, and binary round trip") {
  testutil::TempDir dir("chain");
  PosteriorChain chain(2, 100, 20, 2, 99);
  chain.add_block("theta", {"a", "b"});
  chain.add_block("sigma2", {"sigma2"});
  Rng rng(10);
  for (int c = 0; c < 2; ++c) {
    for (int it = 0; it < 100; ++it) {
      if (!chain.keep(it)) continue;
      Eigen::VectorXd v(2);
      v << rng.normal(), 2.0 + rng.normal();
      chain.append(c, "theta", v);
      chain.append(c, "sigma2", std::abs(rng.normal()) + 0.5);
    }
  }
  CHECK(chain.stored() == chain.expected_stored());
  auto rows = summarize_chain(chain);
  CHECK(rows.size() == 3);
  std::string bin = dir.file("chain.bin");
  write_chain_binary(bin, chain);
  PosteriorChain loaded = read_chain_binary(bin);
  CHECK(loaded.n_chains() == 2);
  CHECK(loaded.pooled("theta", 0) == chain.pooled("theta", 0));
  std::string summary = dir.file("summary.csv");
  write_summary_csv(summary, rows);
  CHECK(testutil::read_file(summary).find("q97.5") != std::string::npos);
}

// Joint-distribution (successive-conditional) check: cycling
// data simulation with the conjugate full conditionals must preserve the
// prior marginals of (mu, sigma2).
TEST_CASE("geweke-style joint test for conjugate updates") {
  const double mu0 = 0.5, v0 = 0.49;  // prior N(mu0, v0)
  const double shape = 5.0, rate = 4.0;
  const int n_data = 3;

  Rng rng(11);
  std::vector<double> prior_mu, prior_s2, loop_mu, loop_s2;
  for (int i = 0; i < 20000; ++i) {
    prior_mu.push_back(mu0 + std::sqrt(v0) * rng.normal());
    prior_s2.push_back(sample_inverse_gamma(shape, rate, rng));
  }
  double mu = mu0;
  double s2 = 1.0;
  for (int i = 0; i < 60000; ++i) {
    // y | mu, s2
    std::vector<GaussianObs> obs(n_data);
    for (auto& o : obs) o = {mu + std::sqrt(s2) * rng.normal(), 1.0 / s2};
    // mu | y, s2
    mu = sample_normal_conjugate(mu0, 1.0 / v0, obs, rng);
    // s2 | y, mu
    double ss = 0;
    for (const auto& o : obs) ss += (o.value - mu) * (o.value - mu);
    s2 = sample_inverse_gamma(shape + 0.5 * n_data, rate + 0.5 * ss, rng);
    if (i % 3 == 0) {
      loop_mu.push_back(mu);
      loop_s2.push_back(s2);
    }
  }
  auto sq = [](std::vector<double> xs) {
    for (auto& x : xs) x *= x;
    return xs;
  };
  // Three moments per parameter; p > 0.001 means |z| < 3.29.
  CHECK(std::abs(testutil::z_two_sample(prior_mu, loop_mu)) < 3.29);
  CHECK(std::abs(testutil::z_two_sample(sq(prior_mu), sq(loop_mu))) < 3.29);
  CHECK(std::abs(testutil::z_two_sample(prior_s2, loop_s2)) < 3.29);
}

// Same joint test for the Metropolis phi update against its U(-1,1) prior.
TEST_CASE("geweke-style joint test for the phi sampler") {
  Rng rng(12);
  const double sigma2 = 0.8;
  const int len = 6;
  std::vector<double> prior_phi, loop_phi;
  for (int i = 0; i < 20000; ++i) prior_phi.push_back(rng.uniform(-1.0, 1.0));
  double phi = 0.0;
  for (int i = 0; i < 60000; ++i) {
    std::vector<double> run(len);
    run[0] = std::sqrt(sigma2 / (1 - phi * phi)) * rng.normal();
    for (int t = 1; t < len; ++t) run[t] = phi * run[t - 1] + std::sqrt(sigma2) * rng.normal();
    Ar1SuffStats stats;
    stats.add_run(run);
    phi = sample_phi_ar1(stats, sigma2, phi, rng, 0.5, 4);
    if (i % 3 == 0) loop_phi.push_back(phi);
  }
  auto sq = [](std::vector<double> xs) {
    for (auto& x : xs) x *= x;
    return xs;
  };
  auto cube = [](std::vector<double> xs) {
    for (auto& x : xs) x = x * x * x;
    return xs;
  };
  CHECK(std::abs(testutil::z_two_sample(prior_phi, loop_phi)) < 3.29);
  CHECK(std::abs(testutil::z_two_sample(sq(prior_phi), sq(loop_phi))) < 3.29);
  CHECK(std::abs(testutil::z_two_sample(cube(prior_phi), cube(loop_phi))) < 3.29);
}

TEST_CASE("ar1 whitened likelihood equals the dense oracle") {
  Rng rng(13);
  for (int len = 1; len <= 8; ++len) {
    for (int rep = 0; rep < 8; ++rep) {
      Eigen::VectorXd e(len);
      for (int t = 0; t < len; ++t) e[t] = rng.normal(0.0, 1.5);
      double phi = rng.uniform(-0.9, 0.9);
      double sigma2 = rng.uniform(0.2, 2.0);
      Ar1SuffStats stats;
      stats.add_run(std::vector<double>(e.data(), e.data() + e.size()));
      double ours = ar1_log_likelihood(stats, phi, sigma2) -
                    0.5 * static_cast<double>(len) * std::log(2.0 * M_PI);
      double oracle = testutil::ar1_dense_loglik(e, phi, sigma2);
      CHECK(std::abs(ours - oracle) < 1e-10);
    }
  }
}

TEST_CASE("whitening transform matches the suff-stat sum of squares") {
  Rng rng(14);
  Eigen::VectorXd e(12);
  for (Eigen::Index t = 0; t < e.size(); ++t) e[t] = rng.normal();
  double phi = 0.4;
  Ar1SuffStats stats;
  stats.add_run(std::vector<double>(e.data(), e.data() + e.size()));
  Eigen::VectorXd w = e;
  ar1_whiten(w, phi);
  CHECK(w.squaredNorm() == doctest::Approx(ar1_whitened_ss(stats, phi)).epsilon(1e-12));
}

}  // TEST_SUITE
