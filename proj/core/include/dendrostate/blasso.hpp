#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dendrostate/chain.hpp"
#include "dendrostate/ring_data.hpp"
#include "dendrostate/spline.hpp"
#include "dendrostate/water_balance.hpp"

namespace dendrostate {

// Park-Casella Bayesian Lasso: beta_k | sigma2, tau2_k ~ N(0, sigma2 tau2_k),
// tau2_k ~ Exp(lambda2 / 2), lambda2 ~ Gamma(r, delta), sigma2 ~ IG(a, b).
struct BlassoConfig {
  int iterations = 4000;
  int burn_in = 1000;
  int thinning = 1;
  std::uint64_t seed = 1;
  double ci_level = 0.90;  // selection: CI excludes zero
  double lambda2_shape = 1.0;   // r
  double lambda2_rate = 1.78;   // delta
  double sigma2_shape = 0.01;
  double sigma2_rate = 0.01;
  // Flat-prior limit: drops the shrinkage hierarchy, leaving plain
  // Bayesian regression with a negligible ridge.
  bool flat_prior = false;
  bool check_standardized = true;
};

struct BlassoResult {
  PosteriorChain chain;  // blocks: beta, lambda2, sigma2
  std::vector<std::string> variables;
  std::vector<int> selected;  // indices into variables
  Eigen::VectorXd median, ci_low, ci_high;
};

// Response is centered internally. Regressor columns must be
// standardized (checked loosely when check_standardized is set).
BlassoResult fit_blasso(const Eigen::VectorXd& response, const Eigen::MatrixXd& regressors,
                        const std::vector<std::string>& names, const BlassoConfig& config);

// The two-stage selection input: per-tree ridge spline fits give
// log-growth deviations, averaged within stand-year, aligned with the
// standardized climate rows.
struct LassoInput {
  Eigen::VectorXd response;
  Eigen::MatrixXd regressors;
  std::vector<std::string> names;
  std::vector<SeasonalClimate::RowKey> cells;
};

LassoInput build_lasso_input(const std::vector<RingSeries>& rings,
                             const SeasonalClimate& climate_z, const StudyWindow& window,
                             const SplineOptions& spline = {});

void write_lasso_summary(const std::string& path, const BlassoResult& result);
std::vector<std::string> read_selected_variables(const std::string& lasso_summary_path);

}  // namespace dendrostate
