#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dendrostate/design.hpp"
#include "dendrostate/water_balance.hpp"

namespace dendrostate {

// Upper-quantile climate thresholds per variable. The quantile is taken
// over the stand-mean annual values with the lower-interpolation order
// statistic; exceedance means strictly above the threshold.
struct ThresholdConfig {
  std::map<std::string, double> quantiles;
  double fallback = 0.95;

  double quantile_for(const std::string& variable) const;
  // The study defaults: summer and lagged summer deficit at 0.95, fall
  // deficit at 0.98, spring deficit and snow at 0.85.
  static ThresholdConfig defaults();
  void validate() const;
};

struct DisturbanceCalendar {
  struct Interval {
    int start_year = 0;
    int end_year = 0;
  };
  std::vector<Interval> outbreaks;  // sorted, non-overlapping
  std::set<std::string> host_species;

  bool in_outbreak(int year) const;
  void validate() const;

  // Structured text: `outbreak START END` and `host CODE` lines,
  // '#' comments.
  static DisturbanceCalendar parse_file(const std::string& path);
  static DisturbanceCalendar parse(const std::string& text, const std::string& origin);
  // Forest tent caterpillar record for the study region.
  static DisturbanceCalendar ftc_defaults();
};

enum class ResponseCategory { zero, weak, threshold, persistent, disturbance, unknown };
const char* to_string(ResponseCategory c);
ResponseCategory response_category_from_string(const std::string& s);

struct ResponseLabel {
  std::string variable;
  int year = 0;
  ResponseCategory category = ResponseCategory::zero;
  double ci_low = 0, ci_high = 0;
  double r2_annual = 0;  // NaN when undefined
};

struct ClassifierConfig {
  double ci_level = 0.95;
  double r2_cut = 0.25;
  int window_half_width = 2;  // threshold attribution window (+-2 years)
  // Order in which sensitive-category rules win when several apply.
  std::vector<ResponseCategory> priority = {ResponseCategory::threshold,
                                            ResponseCategory::persistent,
                                            ResponseCategory::disturbance};
};

// One point of the time-varying coefficient trajectory.
struct TrajectoryRow {
  int year = 0;
  std::string variable;
  double post_mean = 0, ci_low = 0, ci_high = 0;
  double r2_annual = 0;  // NaN when undefined
};

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows);
std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path);

// Window r-squared of the climate regression at posterior means: for
// year t, residuals alpha_{j,s} - f_{j,s}' theta_t over every observed
// cell with s in [t-hw, t+hw], total sum of squares about the window
// mean of alpha. NaN when the window is empty or constant.
double annual_r2(const ModelDesign& design, const Eigen::VectorXd& alpha_mean,
                 const Eigen::MatrixXd& theta_mean, int t, int half_width);

// Mean climate value across stands per year, per variable (from the raw
// seasonal table; NaN rows are skipped).
struct AnnualClimate {
  std::vector<std::string> variables;
  std::vector<int> years;
  Eigen::MatrixXd values;  // years x variables

  int var_index(const std::string& name) const;
};
AnnualClimate stand_mean_climate(const SeasonalClimate& raw);

struct ExceedanceRecord {
  std::string variable;
  double threshold = 0;
  std::vector<int> years;
  std::vector<bool> responded;  // a threshold-category response within +-2 years
};

// The classifier: partitions every trajectory point into zero / weak /
// threshold / persistent / disturbance / unknown.
std::vector<ResponseLabel> classify(const std::vector<TrajectoryRow>& trajectory,
                                    const ThresholdConfig& thresholds,
                                    const AnnualClimate& climate,
                                    const DisturbanceCalendar& calendar,
                                    const ClassifierConfig& config = {});

std::vector<ExceedanceRecord> exceedance_report(const AnnualClimate& climate,
                                                const ThresholdConfig& thresholds,
                                                const std::vector<ResponseLabel>& labels,
                                                int half_width = 2);

struct PartialResidualRow {
  std::string tree_id, stand_id;
  bool host = false;
  int year = 0;
  double residual = 0;  // observed log growth minus spline trend estimate
};

// Partial residuals for trees in the slowest-growing stands over a year
// range: stands ranked by mean stand effect, the lowest ceil(frac * k)
// selected (ties broken by stand id).
std::vector<PartialResidualRow> partial_residuals(
    const ModelDesign& design, const std::vector<Eigen::VectorXd>& fitted_trend_mean,
    const Eigen::VectorXd& alpha_mean, int year_lo, int year_hi,
    const std::set<std::string>& host_species, double stand_fraction = 0.05);

struct InitiationCurvePoint {
  std::string label_set;  // "unknown" or "all"
  int years_since_initiation = 0;
  double cumulative_fraction = 0;
};

// Cumulative distribution of responses over stand age: each sensitive
// (variable, year) contributes one event per stand observed that year at
// that stand's age.
std::vector<InitiationCurvePoint> initiation_curve(const std::vector<ResponseLabel>& labels,
                                                   const ModelDesign& design);

void write_labels_csv(const std::string& path, const std::vector<ResponseLabel>& labels);
std::vector<ResponseLabel> read_labels_csv(const std::string& path);
void write_exceedances_csv(const std::string& path,
                           const std::vector<ExceedanceRecord>& records);
void write_partial_residuals_csv(const std::string& path,
                                 const std::vector<PartialResidualRow>& rows);
void write_initiation_curve_csv(const std::string& path,
                                const std::vector<InitiationCurvePoint>& points);

}  // namespace dendrostate
