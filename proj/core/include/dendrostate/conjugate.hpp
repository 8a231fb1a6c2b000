#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dendrostate/rng.hpp"

namespace dendrostate {

struct GaussianObs {
  double value = 0;
  double precision = 0;
};

// Exact draw from the Gaussian full conditional of a scalar mean with
// prior N(prior_mean, 1/prior_precision) and independent Gaussian
// observations. Infinite prior precision degenerates to the prior mean;
// with no observations the draw comes from the prior.
double sample_normal_conjugate(double prior_mean, double prior_precision,
                               std::span<const GaussianObs> obs, Rng& rng);

// Draw from N(P^{-1} b, P^{-1}) given the posterior precision P and the
// linear term b. Throws NumericError if P is not positive definite.
Eigen::VectorXd sample_mvn_precision(const Eigen::MatrixXd& precision,
                                     const Eigen::VectorXd& linear, Rng& rng);

// Draw from N(mean, cov). Throws NumericError if cov has a negative
// eigenvalue beyond jitter repair.
Eigen::VectorXd sample_mvn_covariance(const Eigen::VectorXd& mean,
                                      const Eigen::MatrixXd& cov, Rng& rng);

// Inverse-gamma(shape, rate): density proportional to
// x^{-shape-1} exp(-rate/x); mean = rate/(shape-1) for shape > 1.
double sample_inverse_gamma(double shape, double rate, Rng& rng);

// Inverse-Wishart(df, scale) via Bartlett decomposition of the Wishart.
Eigen::MatrixXd sample_inverse_wishart(double df, const Eigen::MatrixXd& scale, Rng& rng);

// ---------------------------------------------------------------------
// AR1 residual machinery. Residual runs are contiguous in time; the
// stationary likelihood gives the first observation of each run variance
// sigma2/(1-phi^2) and subsequent observations conditional variance
// sigma2. Sufficient statistics make the phi likelihood O(1) to
// re-evaluate.

struct Ar1SuffStats {
  double first_sq = 0;    // sum over runs of e_first^2
  double tail_sq = 0;     // sum over runs, t>first: e_t^2
  double cross = 0;       // sum e_t * e_{t-1}
  double head_sq = 0;     // sum e_{t-1}^2
  long n_runs = 0;
  long n_obs = 0;

  void add_run(std::span<const double> residuals);
  void add(const Ar1SuffStats& other);
};

// Whitened sum of squares at a given phi.
double ar1_whitened_ss(const Ar1SuffStats& stats, double phi);

// Exact stationary log-likelihood (up to the 2*pi constant).
double ar1_log_likelihood(const Ar1SuffStats& stats, double phi, double sigma2);

// Metropolis-within-Gibbs update for phi on (-1, 1): reflecting
// random-walk proposals against the exact stationary likelihood, flat
// prior. Returns the new phi.
double sample_phi_ar1(const Ar1SuffStats& stats, double sigma2, double current_phi,
                      Rng& rng, double proposal_sd = 0.08, int steps = 2);

// Applies the whitening transform in place: first row scaled by
// sqrt(1-phi^2), each later row replaced by row_t - phi * row_{t-1}
// (rows processed back to front). Works for the response vector and the
// basis matrix alike.
void ar1_whiten(Eigen::Ref<Eigen::VectorXd> v, double phi);
void ar1_whiten_rows(Eigen::Ref<Eigen::MatrixXd> m, double phi);

}  // namespace dendrostate
