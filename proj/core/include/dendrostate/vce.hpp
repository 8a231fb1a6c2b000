#pragma once

#include <string>
#include <vector>

#include "dendrostate/classifier.hpp"
#include "dendrostate/growth_model.hpp"
#include "dendrostate/kalman.hpp"

namespace dendrostate {

struct VceConfig {
  McmcOptions mcmc;
  GrowthPriors priors;
  WindowPlan plan;  // strict by default: exact FFBS; windowed = five-year pooling
  bool sigma_theta_diagonal = true;
  // Inverse-gamma prior on the diagonal random-walk noise variances.
  double sigma_theta_prior_shape = 0.01;
  double sigma_theta_prior_rate = 0.01;
  // Inverse-Wishart option when sigma_theta_diagonal is false.
  double iw_extra_df = 2.0;
  double iw_scale = 0.01;
  // theta_0 prior; defaults to N(0, coef_sd^2 I) when left empty.
  Eigen::VectorXd theta0_mean;
  Eigen::MatrixXd theta0_cov;
};

struct VceState : GrowthState {
  Eigen::MatrixXd theta_path;   // n_years x p
  Eigen::MatrixXd sigma_theta;  // p x p random-walk noise
};

struct VceFit {
  PosteriorChain chain;
  std::vector<Eigen::VectorXd> fitted_trend_mean;  // per segment
  int filter_jitter_events = 0;
};

// State-space extension: the climate coefficients follow a random walk
// and are redrawn each sweep by forward-filtering backward-sampling
// conditionally on the current stand effects.
class VceSampler {
 public:
  VceSampler(const ModelDesign& design, VceConfig config);

  const GrowthModel& core() const { return core_; }
  const VceConfig& config() const { return config_; }

  VceState initial_state() const;
  Eigen::VectorXd alpha_prior_mean(const VceState& state) const;

  void update_theta_path(VceState& state, Rng& rng, int* jitter_events = nullptr) const;
  void update_sigma_theta(VceState& state, Rng& rng) const;

  void gibbs_sweep(VceState& state, Rng& rng, std::uint64_t seed, long sweep,
                   int* jitter_events = nullptr) const;

  double log_joint(const VceState& state) const;

  VceFit fit() const;

 private:
  GrowthModel core_;
  VceConfig config_;

  void run_chain(int chain_index, PosteriorChain& chain,
                 std::vector<Eigen::VectorXd>& fitted_sum, long& fitted_draws,
                 int& jitter_events) const;
};

VceFit fit_vce(const ModelDesign& design, const VceConfig& config);

// Per-year posterior mean and 95% interval for every variable, with the
// window r-squared attached (the data behind the coefficient-evolution
// figure).
std::vector<TrajectoryRow> summarize_trajectory(const PosteriorChain& chain,
                                                const ModelDesign& design,
                                                int r2_half_width = 2,
                                                double ci_level = 0.95);

}  // namespace dendrostate
