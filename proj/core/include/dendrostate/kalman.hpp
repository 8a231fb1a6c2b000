#pragma once

#include <vector>

#include <Eigen/Dense>

#include "dendrostate/design.hpp"
#include "dendrostate/rng.hpp"

namespace dendrostate {

// Which stand-effect rows inform the state at year t. Windowed mode
// replicates each row into every state within the five-year span
// (partial temporal pooling; each row is used up to five times, so the
// result is a pseudo-posterior). Strict mode assigns each row to its own
// year only and is an exact sampler.
struct WindowPlan {
  enum class Mode { strict, windowed };
  Mode mode = Mode::strict;
  int half_width = 2;  // +-2 years = the five-year window
};

// Stacked observation rows per year for the random-walk state model:
// y_t = F_t theta_t + N(0, tau2 I), theta_t = theta_{t-1} + w_t.
struct StateObservations {
  std::vector<Eigen::MatrixXd> F;  // per year: n_t x p (may be 0 rows)
  std::vector<Eigen::VectorXd> y;  // per year: n_t

  int n_years() const { return static_cast<int>(F.size()); }
  int dim() const { return F.empty() ? 0 : static_cast<int>(F.front().cols()); }
};

// Builds the per-year row sets from the design's observed cells and the
// current stand-effect values (aligned with design.cells).
StateObservations window_observations(const ModelDesign& design,
                                      const Eigen::VectorXd& alpha,
                                      const WindowPlan& plan);

struct KalmanResult {
  std::vector<Eigen::VectorXd> pred_mean, filt_mean;
  std::vector<Eigen::MatrixXd> pred_cov, filt_cov;
  int jitter_events = 0;  // PSD repairs during filtering
};

// Forward filter with identity evolution. Years with no rows are pure
// predict steps. Covariance loss of definiteness is repaired by
// symmetrize-and-jitter and counted in jitter_events.
KalmanResult kalman_filter(const StateObservations& obs, const Eigen::MatrixXd& sigma_theta,
                           double tau2, const Eigen::VectorXd& m0, const Eigen::MatrixXd& C0);

// Rauch-Tung-Striebel smoothed means (and covariances when requested).
std::vector<Eigen::VectorXd> kalman_smoother(const KalmanResult& filt,
                                             const Eigen::MatrixXd& sigma_theta,
                                             std::vector<Eigen::MatrixXd>* cov_out = nullptr);

// Forward-filtering backward-sampling: exact joint draw of theta_{1:T}
// given the filter output (strict mode; in windowed mode this samples
// the windowed pseudo-posterior).
std::vector<Eigen::VectorXd> ffbs(const KalmanResult& filt, const Eigen::MatrixXd& sigma_theta,
                                  Rng& rng);

}  // namespace dendrostate
