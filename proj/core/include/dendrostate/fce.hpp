#pragma once

#include <string>
#include <vector>

#include "dendrostate/growth_model.hpp"

namespace dendrostate {

struct FceConfig {
  McmcOptions mcmc;
  GrowthPriors priors;
};

struct FceState : GrowthState {
  Eigen::VectorXd theta;  // time-constant climate coefficients
};

struct FceFit {
  PosteriorChain chain;
  // Posterior mean of the spline trend per observation, aligned with the
  // design segments (consumed by the partial-residual report).
  std::vector<Eigen::VectorXd> fitted_trend_mean;
};

// Gibbs sampler for the fixed-climate-effects model: tree-level spline
// trends with AR1 errors, stand-year effects, and a time-constant
// climate regression as the stand-effect prior.
class FceSampler {
 public:
  FceSampler(const ModelDesign& design, FceConfig config);

  const GrowthModel& core() const { return core_; }
  const FceConfig& config() const { return config_; }

  FceState initial_state() const;
  Eigen::VectorXd alpha_prior_mean(const FceState& state) const;

  void update_theta(FceState& state, Rng& rng) const;

  // One full scan in the fixed order: beta, alpha, theta, variances, phi.
  // `seed` and `sweep` feed the per-tree substreams of the beta update.
  void gibbs_sweep(FceState& state, Rng& rng, std::uint64_t seed, long sweep) const;

  double log_joint(const FceState& state) const;

  FceFit fit() const;

 private:
  GrowthModel core_;
  FceConfig config_;

  void run_chain(int chain_index, PosteriorChain& chain,
                 std::vector<Eigen::VectorXd>& fitted_sum, long& fitted_draws) const;
};

FceFit fit_fce(const ModelDesign& design, const FceConfig& config);

void write_theta_summary(const std::string& path, const PosteriorChain& chain,
                         const std::vector<std::string>& variables);

}  // namespace dendrostate
