#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dendrostate/blasso.hpp"
#include "dendrostate/classifier.hpp"
#include "dendrostate/fce.hpp"
#include "dendrostate/synth.hpp"
#include "dendrostate/vce.hpp"

namespace dendrostate {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Stage { simulate, water_balance, select, fit_fce, fit_vce, classify, report };

Stage stage_from_string(const std::string& name);
const char* to_string(Stage stage);

// One structured-text (JSON) configuration drives every stage. Paths are
// resolved relative to the config file's directory.
struct RunConfig {
  std::string output_dir = "out";
  std::string rings_csv;
  std::string monthly_climate_csv;
  std::string seasonal_climate_csv;  // direct seasonal input (skips water balance)
  std::string calendar_file;         // empty = the study FTC record

  StudyWindow window;  // 1897..2007 by default
  WaterBalanceParams water_balance;
  SplineOptions spline;
  std::vector<std::string> selected_variables;  // empty = take the lasso selection

  McmcOptions sampler;
  GrowthPriors priors;
  WindowPlan plan;  // strict | windowed
  BlassoConfig lasso;
  ThresholdConfig thresholds = ThresholdConfig::defaults();
  ClassifierConfig classifier;
  SynthConfig synth;

  std::string chain_format = "csv";  // or "binary"
  double rhat_warn = 1.1;
  std::vector<std::pair<int, int>> partial_residual_ranges;  // empty = outbreak spans

  static RunConfig from_json_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text, const std::string& origin,
                                  const std::string& base_dir);
};

std::vector<Stage> parse_stage_list(const std::string& csv_list);

// Runs the stages in order. Returns the process exit code: 0 success,
// 2 config error, 3 data error, 4 convergence warning (outputs written).
int run_pipeline(const RunConfig& config, const std::vector<Stage>& stages,
                 std::string* error_message = nullptr);

}  // namespace dendrostate
