#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace testutil {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline double mean_of(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double var_of(const std::vector<double>& xs) {
  double m = mean_of(xs);
  double s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

// Two-sample z statistic for equality of means.
inline double z_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  double se = std::sqrt(var_of(a) / static_cast<double>(a.size()) +
                        var_of(b) / static_cast<double>(b.size()));
  if (se == 0) return 0;
  return (mean_of(a) - mean_of(b)) / se;
}

// ---------------------------------------------------------------------
// Dense-matrix oracles. These deliberately take the brute-force route
// (full covariance assembly, generic conditioning) so they share no code
// with the implementations they check.

// Exact stationary AR1 log density via the dense covariance matrix
// sigma2 * phi^|s-t| / (1 - phi^2), including the 2*pi constant.
inline double ar1_dense_loglik(const Eigen::VectorXd& e, double phi, double sigma2) {
  const Eigen::Index n = e.size();
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    for (Eigen::Index t = 0; t < n; ++t) {
      cov(s, t) = sigma2 * std::pow(phi, std::abs(static_cast<double>(s - t))) /
                  (1.0 - phi * phi);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  double logdet = 0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  double quad = e.dot(llt.solve(e));
  return -0.5 * (static_cast<double>(n) * std::log(2.0 * M_PI) + logdet + quad);
}

// Joint Gaussian over the random-walk states theta_{1:T} (p-dimensional,
// theta_0 ~ N(m0, C0) integrated out) conditioned on stacked rows
// y_t = F_t theta_t + N(0, tau2). Conditioning is plain block-matrix
// Gaussian algebra on the full joint.
struct RandomWalkOracle {
  int T = 0, p = 0;
  Eigen::VectorXd prior_mean;  // T*p
  Eigen::MatrixXd prior_cov;   // T*p x T*p

  RandomWalkOracle(int T_, const Eigen::VectorXd& m0, const Eigen::MatrixXd& C0,
                   const Eigen::MatrixXd& sigma_theta)
      : T(T_), p(static_cast<int>(m0.size())) {
    prior_mean.resize(T * p);
    prior_cov.resize(T * p, T * p);
    for (int t = 0; t < T; ++t) prior_mean.segment(t * p, p) = m0;
    for (int s = 0; s < T; ++s) {
      for (int t = 0; t < T; ++t) {
        // Cov(theta_s, theta_t) = C0 + min(s,t) * Sigma (1-based counts).
        prior_cov.block(s * p, t * p, p, p) =
            C0 + static_cast<double>(std::min(s, t) + 1) * sigma_theta;
      }
    }
  }

  // Observation rows: for each (year t, row f, value y).
  struct Row {
    int t;
    Eigen::VectorXd f;
    double y;
  };

  // Posterior of the stacked states given a set of rows with noise tau2.
  void condition(const std::vector<Row>& rows, double tau2, Eigen::VectorXd& mean_out,
                 Eigen::MatrixXd& cov_out) const {
    const int n = static_cast<int>(rows.size());
    if (n == 0) {
      mean_out = prior_mean;
      cov_out = prior_cov;
      return;
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, T * p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      H.block(i, rows[static_cast<std::size_t>(i)].t * p, 1, p) =
          rows[static_cast<std::size_t>(i)].f.transpose();
      y[i] = rows[static_cast<std::size_t>(i)].y;
    }
    Eigen::MatrixXd S = H * prior_cov * H.transpose() +
                        tau2 * Eigen::MatrixXd::Identity(n, n);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    Eigen::MatrixXd K = prior_cov * H.transpose() * llt.solve(Eigen::MatrixXd::Identity(n, n));
    mean_out = prior_mean + K * (y - H * prior_mean);
    cov_out = prior_cov - K * H * prior_cov;
  }

  // Marginal of one year from stacked moments.
  static Eigen::VectorXd year_mean(const Eigen::VectorXd& mean, int t, int p) {
    return mean.segment(t * p, p);
  }
  static Eigen::MatrixXd year_cov(const Eigen::MatrixXd& cov, int t, int p) {
    return cov.block(t * p, t * p, p, p);
  }
};

}  // namespace testutil
