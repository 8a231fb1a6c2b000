#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dendrostate {

struct MonthlyClimate {
  std::string stand_id;
  int year = 0;
  int month = 0;  // 1..12
  double tmin_c = 0, tmean_c = 0, tmax_c = 0;
  double precip_mm = 0;
  double latitude_deg = 0;
};

struct WaterBalanceParams {
  double awc_mm = 150.0;     // soil available water capacity
  double snow_temp_c = 0.0;  // precipitation is all snow at or below
  double rain_temp_c = 6.0;  // all rain at or above; linear partition between
  double melt_temp_c = 6.0;  // melt fraction = clamp(tmean / melt_temp, 0, 1)
  int spinup_max_cycles = 50;
  double spinup_tol_mm = 0.01;
};

struct BucketState {
  double snowpack_mm = 0.0;
  double soil_water_mm = 0.0;
};

struct BucketFlux {
  double aet_mm = 0, deficit_mm = 0, runoff_mm = 0;
  double rain_mm = 0, snowfall_mm = 0, melt_mm = 0;
};

struct WaterBalanceMonth {
  int year = 0, month = 0;
  double tmin_c = 0, tmean_c = 0, tmax_c = 0, precip_mm = 0;
  double pet_mm = 0, aet_mm = 0, deficit_mm = 0;
  double snowpack_mm = 0, soil_water_mm = 0, runoff_mm = 0;
};

struct WaterBalanceSeries {
  std::string stand_id;
  double latitude_deg = 0;
  WaterBalanceParams params;
  std::vector<WaterBalanceMonth> months;  // contiguous, whole calendar years
};

// Fraction of 12-hour days for the month: mean daylength from solar
// declination at mid-month, divided by 12. Exactly 1 at the equator.
// Throws ConfigError outside |latitude| <= 66.5.
double daylength_factor(int month, double latitude_deg);

// Monthly PET (mm) for one calendar year from the Thornthwaite closed
// form: annual heat index over months with tmean > 0, cubic exponent,
// daylength correction. PET = 0 for months with tmean <= 0.
std::array<double, 12> thornthwaite_pet(const std::array<double, 12>& tmean_c,
                                        double latitude_deg);

// One month of the snow + soil bucket. Mutates state, returns fluxes.
// Mass balance: precip = d(snow) + d(soil) + aet + runoff.
BucketFlux step_bucket(BucketState& state, double tmean_c, double precip_mm,
                       double pet_mm, const WaterBalanceParams& params);

// Full record for one stand: whole calendar years, sorted, contiguous.
// The first year is cycled until the bucket state settles (spin-up).
WaterBalanceSeries run_water_balance(const std::vector<MonthlyClimate>& months,
                                     const WaterBalanceParams& params = {});

// ---------------------------------------------------------------------
// Seasonal aggregation (the 28-variable table)

// Fixed variable order: Tmin/Tmean/Tmax means over the five seasonal
// windows, AET/PET/DEF totals over fall/spring/summer/summer-lag, and
// winter mean snowpack.
const std::vector<std::string>& seasonal_variable_names();

struct SeasonalClimate {
  std::vector<std::string> variables;
  struct RowKey {
    std::string stand_id;
    int year = 0;
  };
  std::vector<RowKey> rows;
  Eigen::MatrixXd values;  // rows x variables, NaN where the window is incomplete
  bool standardized = false;
  Eigen::VectorXd mean, sd;  // per variable; set by standardize()

  int var_index(const std::string& name) const;  // -1 when absent
  int row_index(const std::string& stand_id, int year) const;
};

// Seasonal windows for growth year t: fall = Sep-Nov of t-1, winter =
// Dec of t-1 through Feb of t, spring = Mar-May of t, summer = Jun-Aug
// of t, summer-lag = Jun-Aug of t-1. A stand-year whose window has any
// missing month gets NaN for the affected variables.
SeasonalClimate aggregate_seasonal(const std::vector<WaterBalanceSeries>& series);

// Per-variable z-scores over all stand-years with data (sample sd).
// Throws DataError naming any zero-variance variable.
SeasonalClimate standardize(const SeasonalClimate& raw);

// Inverse of standardize given the stored parameters.
SeasonalClimate destandardize(const SeasonalClimate& z);

// ---------------------------------------------------------------------
// CSV interfaces

// Input schema: stand_id, year, month, tmin_c, tmean_c, tmax_c,
// precip_mm, latitude. Validates tmin <= tmean <= tmax and precip >= 0.
std::vector<MonthlyClimate> read_monthly_climate(const std::string& path);

void write_monthly_water_balance(const std::string& path,
                                 const std::vector<WaterBalanceSeries>& series);

// One row per stand-year: raw columns named after the variable, z-scored
// columns with a "_z" suffix.
void write_seasonal_csv(const std::string& path, const SeasonalClimate& raw,
                        const SeasonalClimate& z);

// Reads either the raw or the "_z" column set.
SeasonalClimate read_seasonal_csv(const std::string& path, bool standardized);

void write_standardization_params(const std::string& path, const SeasonalClimate& z);

}  // namespace dendrostate
