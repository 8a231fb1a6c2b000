#include "dendrostate/conjugate.hpp"

#include <cmath>
#include <limits>

#include "dendrostate/errors.hpp"

namespace dendrostate {

double sample_normal_conjugate(double prior_mean, double prior_precision,
                               std::span<const GaussianObs> obs, Rng& rng) {
  if (std::isinf(prior_precision)) return prior_mean;
  if (prior_precision < 0) throw NumericError("negative prior precision");
  double precision = prior_precision;
  double linear = prior_precision * prior_mean;
  for (const GaussianObs& o : obs) {
    if (o.precision < 0) throw NumericError("negative observation precision");
    precision += o.precision;
    linear += o.precision * o.value;
  }
  if (!(precision > 0)) throw NumericError("non-positive posterior precision");
  double mean = linear / precision;
  return mean + rng.normal() / std::sqrt(precision);
}

Eigen::VectorXd sample_mvn_precision(const Eigen::MatrixXd& precision,
                                     const Eigen::VectorXd& linear, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw NumericError("sample_mvn_precision: precision is not positive definite");
  }
  Eigen::VectorXd mean = llt.solve(linear);
  // x = mean + L^{-T} z has covariance P^{-1}.
  Eigen::VectorXd z = rng.normal_vector(static_cast<int>(linear.size()));
  return mean + llt.matrixU().solve(z);
}

Eigen::VectorXd sample_mvn_covariance(const Eigen::VectorXd& mean,
                                      const Eigen::MatrixXd& cov, Rng& rng) {
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    // Jitter recovery for covariances that lost definiteness to rounding.
    double scale = std::max(sym.diagonal().maxCoeff(), 1e-300);
    for (int attempt = 0; attempt < 6; ++attempt) {
      double jitter = scale * std::pow(10.0, attempt - 12);
      llt.compute(sym + jitter * Eigen::MatrixXd::Identity(sym.rows(), sym.cols()));
      if (llt.info() == Eigen::Success) break;
    }
    if (llt.info() != Eigen::Success) {
      throw NumericError("sample_mvn_covariance: covariance not PSD after jitter");
    }
  }
  Eigen::VectorXd z = rng.normal_vector(static_cast<int>(mean.size()));
  return mean + llt.matrixL() * z;
}

double sample_inverse_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0) || !(rate > 0)) {
    throw NumericError("sample_inverse_gamma: shape and rate must be positive");
  }
  return 1.0 / rng.gamma(shape, rate);
}

Eigen::MatrixXd sample_inverse_wishart(double df, const Eigen::MatrixXd& scale, Rng& rng) {
  const Eigen::Index p = scale.rows();
  if (!(df > static_cast<double>(p) - 1)) {
    throw NumericError("sample_inverse_wishart: df must exceed dim - 1");
  }
  // W ~ Wishart(df, scale^{-1}) via Bartlett; return W^{-1}.
  Eigen::LLT<Eigen::MatrixXd> llt(scale.inverse());
  if (llt.info() != Eigen::Success) {
    throw NumericError("sample_inverse_wishart: scale not positive definite");
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    A(i, i) = std::sqrt(rng.chi_square(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd LA = L * A;
  Eigen::MatrixXd W = LA * LA.transpose();
  return W.inverse();
}

// ---------------------------------------------------------------------

void Ar1SuffStats::add_run(std::span<const double> residuals) {
  if (residuals.empty()) return;
  first_sq += residuals[0] * residuals[0];
  ++n_runs;
  n_obs += static_cast<long>(residuals.size());
  for (std::size_t t = 1; t < residuals.size(); ++t) {
    tail_sq += residuals[t] * residuals[t];
    cross += residuals[t] * residuals[t - 1];
    head_sq += residuals[t - 1] * residuals[t - 1];
  }
}

void Ar1SuffStats::add(const Ar1SuffStats& other) {
  first_sq += other.first_sq;
  tail_sq += other.tail_sq;
  cross += other.cross;
  head_sq += other.head_sq;
  n_runs += other.n_runs;
  n_obs += other.n_obs;
}

double ar1_whitened_ss(const Ar1SuffStats& stats, double phi) {
  return (1.0 - phi * phi) * stats.first_sq + stats.tail_sq - 2.0 * phi * stats.cross +
         phi * phi * stats.head_sq;
}

double ar1_log_likelihood(const Ar1SuffStats& stats, double phi, double sigma2) {
  if (!(sigma2 > 0) || std::abs(phi) >= 1.0) return -std::numeric_limits<double>::infinity();
  return 0.5 * static_cast<double>(stats.n_runs) * std::log(1.0 - phi * phi) -
         0.5 * static_cast<double>(stats.n_obs) * std::log(sigma2) -
         ar1_whitened_ss(stats, phi) / (2.0 * sigma2);
}

double sample_phi_ar1(const Ar1SuffStats& stats, double sigma2, double current_phi, Rng& rng,
                      double proposal_sd, int steps) {
  double phi = current_phi;
  double loglik = ar1_log_likelihood(stats, phi, sigma2);
  for (int s = 0; s < steps; ++s) {
    double prop = phi + proposal_sd * rng.normal();
    // Reflect back into (-1, 1); the kernel stays symmetric.
    for (int guard = 0; guard < 64 && (prop <= -1.0 || prop >= 1.0); ++guard) {
      if (prop >= 1.0) prop = 2.0 - prop;
      if (prop <= -1.0) prop = -2.0 - prop;
    }
    if (prop <= -1.0 || prop >= 1.0) continue;
    double prop_loglik = ar1_log_likelihood(stats, prop, sigma2);
    if (std::log(rng.uniform()) < prop_loglik - loglik) {
      phi = prop;
      loglik = prop_loglik;
    }
  }
  return phi;
}

void ar1_whiten(Eigen::Ref<Eigen::VectorXd> v, double phi) {
  for (Eigen::Index t = v.size() - 1; t >= 1; --t) v[t] -= phi * v[t - 1];
  if (v.size() > 0) v[0] *= std::sqrt(1.0 - phi * phi);
}

void ar1_whiten_rows(Eigen::Ref<Eigen::MatrixXd> m, double phi) {
  for (Eigen::Index t = m.rows() - 1; t >= 1; --t) m.row(t) -= phi * m.row(t - 1);
  if (m.rows() > 0) m.row(0) *= std::sqrt(1.0 - phi * phi);
}

}  // namespace dendrostate
