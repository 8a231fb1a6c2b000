#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dendrostate/chain.hpp"
#include "dendrostate/conjugate.hpp"
#include "dendrostate/design.hpp"
#include "dendrostate/rng.hpp"

namespace dendrostate {

struct McmcOptions {
  int iterations = 1500;
  int burn_in = 500;
  int thinning = 1;
  int chains = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  bool store_alpha = true;
  std::string stream_prefix;  // empty = no streaming to disk
  int stream_every = 100;

  void validate() const;
};

struct GrowthPriors {
  // Inverse-gamma(shape, rate) on sigma2_pe, tau2, sigma2_beta and the
  // random-walk noise variances.
  double variance_shape = 0.01;
  double variance_rate = 0.01;
  // N(0, coef_sd^2) baseline on climate and spline coefficients.
  double coef_sd = 10.0;
  // phi ~ Uniform(-1, 1) with reflecting Metropolis proposals.
  double phi_proposal_sd = 0.08;
  int phi_steps = 2;
  // Abort when any variance exceeds this.
  double divergence_guard = 1e12;
  // Pin a parameter instead of sampling it (limit studies and tests).
  std::optional<double> fix_sigma2_pe;
  std::optional<double> fix_tau2;
  std::optional<double> fix_sigma2_beta;
  std::optional<double> fix_phi;
};

// Parameters shared by the fixed- and variable-coefficient models:
// everything except the climate coefficient block.
struct GrowthState {
  Eigen::MatrixXd beta;                 // n_trees x n_basis
  Eigen::VectorXd alpha;                // n_cells (design cell order)
  double sigma2_pe = 1.0;
  double phi = 0.0;
  double tau2 = 1.0;
  double sigma2_beta = 1.0;
  std::vector<Eigen::VectorXd> fitted;  // per segment: B * beta_i cache
};

// Full-conditional updates for the shared blocks. The stand-effect and
// variance updates take the current prior mean of each alpha cell
// (F theta for the fixed model, f_{j,t}' theta_t for the time-varying
// one); everything else is identical between the two samplers.
class GrowthModel {
 public:
  GrowthModel(const ModelDesign& design, GrowthPriors priors);

  const ModelDesign& design() const { return *design_; }
  const GrowthPriors& priors() const { return priors_; }
  const Eigen::MatrixXd& penalty() const { return penalty_; }
  int penalty_rank() const { return penalty_rank_; }
  const Eigen::MatrixXd& climate_cross() const { return FtF_; }

  GrowthState initial_state() const;

  // Per-tree AR1-whitened ridge regressions. Draws come from per-tree
  // substreams of (seed, sweep) so the result is identical for any
  // thread count.
  void update_beta(GrowthState& state, std::uint64_t seed, long sweep, int threads) const;

  // Stand-by-stand block draw of the stand effects: tridiagonal
  // whitened likelihood plus the independent N(prior_mean, tau2) prior.
  void update_alpha(GrowthState& state, const Eigen::VectorXd& prior_mean, Rng& rng) const;

  Ar1SuffStats residual_stats(const GrowthState& state) const;

  void update_sigma2_pe(GrowthState& state, Rng& rng) const;
  void update_tau2(GrowthState& state, const Eigen::VectorXd& prior_mean, Rng& rng) const;
  void update_sigma2_beta(GrowthState& state, Rng& rng) const;
  void update_phi(GrowthState& state, Rng& rng) const;

  // Joint log density of the shared blocks (up to a constant), for the
  // sanity trace.
  double log_joint_shared(const GrowthState& state, const Eigen::VectorXd& prior_mean) const;

  void check_divergence(const GrowthState& state) const;

  // Refreshes the fitted cache for one tree (used by update_beta).
  void refresh_fitted(GrowthState& state, int tree) const;

 private:
  const ModelDesign* design_;
  GrowthPriors priors_;
  Eigen::MatrixXd penalty_;  // K = D'D
  int penalty_rank_ = 0;
  Eigen::MatrixXd FtF_;
  std::vector<std::vector<int>> stand_segments_;

  void update_beta_range(GrowthState& state, std::uint64_t seed, long sweep, int begin,
                         int end) const;
};

}  // namespace dendrostate
