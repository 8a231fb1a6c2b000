#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dendrostate/ring_data.hpp"
#include "dendrostate/water_balance.hpp"

namespace dendrostate {

// Forward simulation of the full generative model: climate covariates,
// climate coefficients (constant, step, or ramp path), stand effects,
// tree trends, AR1 residuals, exponentiated to ring widths.
struct SynthConfig {
  int n_trees = 200;
  int n_stands = 20;
  int n_years = 60;
  int p = 5;

  enum class Path { constant, step, ramp };
  Path path = Path::constant;
  Eigen::VectorXd theta;       // defaults to (-0.3, -0.2, -0.25, -0.25, 0.15) for p = 5
  int step_year_index = -1;    // default n_years / 2
  int step_component = 0;
  double step_to = -0.6;       // value after the step
  Eigen::VectorXd ramp_to;     // linear target for the ramp path

  double sigma2_pe = 0.29;
  double phi = 0.37;
  double tau2 = 0.05;
  Eigen::VectorXd sigma_theta_diag;  // random-walk noise; default zero

  enum class Trend { flat, concave };
  Trend trend = Trend::concave;
  bool staggered_recruitment = true;
  int min_record_years = 8;

  std::uint64_t seed = 1;
  int start_year = 1948;  // calendar anchor; 60 years ending 2007
  std::vector<std::string> var_names;  // default: the five selected study variables

  void validate() const;
  Eigen::VectorXd default_theta() const;
  std::vector<std::string> default_names() const;
};

struct SynthTruth {
  Eigen::MatrixXd theta_path;  // n_years x p
  double sigma2_pe = 0, phi = 0, tau2 = 0;
  // Empirical variances of the generated noise draws, for the
  // tree-level vs stand-level variance ratio check.
  double tree_innovation_var = 0;
  double stand_noise_var = 0;
  double stationary_residual_var = 0;
};

struct SynthData {
  std::vector<RingSeries> rings;
  SeasonalClimate climate;  // standardized covariates, one row per stand-year
  SynthTruth truth;
};

SynthData simulate(const SynthConfig& config);

void write_truth_csv(const std::string& path, const SynthConfig& config, const SynthTruth& truth);

}  // namespace dendrostate
