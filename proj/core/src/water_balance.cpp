#include "dendrostate/water_balance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "dendrostate/csv.hpp"
#include "dendrostate/errors.hpp"
#include "dendrostate/stats.hpp"

namespace dendrostate {

namespace {

constexpr double kPi = std::numbers::pi;

// Day of year of the 15th of each month (non-leap calendar).
constexpr int kMidMonthDoy[12] = {15, 46, 74, 105, 135, 166, 196, 227, 258, 288, 319, 349};

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

double daylength_factor(int month, double latitude_deg) {
  if (month < 1 || month > 12) throw ConfigError("month must be 1..12");
  if (std::abs(latitude_deg) > 66.5) {
    throw ConfigError("latitude " + format_number(latitude_deg) +
                      " outside [-66.5, 66.5]: daylength correction undefined");
  }
  int doy = kMidMonthDoy[month - 1];
  double decl = 23.45 * kPi / 180.0 * std::sin(2.0 * kPi * (284.0 + doy) / 365.0);
  double lat = latitude_deg * kPi / 180.0;
  double cos_omega = std::clamp(-std::tan(lat) * std::tan(decl), -1.0, 1.0);
  double omega = std::acos(cos_omega);
  double daylength_hours = 24.0 / kPi * omega;
  return daylength_hours / 12.0;
}

std::array<double, 12> thornthwaite_pet(const std::array<double, 12>& tmean_c,
                                        double latitude_deg) {
  double heat_index = 0.0;
  for (double t : tmean_c) {
    if (t > 0.0) heat_index += std::pow(t / 5.0, 1.514);
  }
  std::array<double, 12> pet{};
  if (heat_index <= 0.0) return pet;  // every month at or below freezing
  double I = heat_index;
  double a = 6.75e-7 * I * I * I - 7.71e-5 * I * I + 1.792e-2 * I + 0.49239;
  for (int m = 0; m < 12; ++m) {
    double t = tmean_c[m];
    if (t <= 0.0) continue;
    pet[m] = 16.0 * std::pow(10.0 * t / I, a) * daylength_factor(m + 1, latitude_deg);
  }
  return pet;
}

BucketFlux step_bucket(BucketState& state, double tmean_c, double precip_mm,
                       double pet_mm, const WaterBalanceParams& params) {
  BucketFlux flux;
  double precip = std::max(precip_mm, 0.0);
  double pet = std::max(pet_mm, 0.0);

  double span = params.rain_temp_c - params.snow_temp_c;
  double frac_snow = span > 0.0 ? clamp01((params.rain_temp_c - tmean_c) / span)
                                : (tmean_c <= params.snow_temp_c ? 1.0 : 0.0);
  flux.snowfall_mm = frac_snow * precip;
  flux.rain_mm = precip - flux.snowfall_mm;

  state.snowpack_mm += flux.snowfall_mm;
  double melt_span = params.melt_temp_c - params.snow_temp_c;
  double melt_frac = melt_span > 0.0
                         ? clamp01((tmean_c - params.snow_temp_c) / melt_span)
                         : (tmean_c > params.snow_temp_c ? 1.0 : 0.0);
  flux.melt_mm = melt_frac * state.snowpack_mm;
  state.snowpack_mm -= flux.melt_mm;

  double supply = flux.rain_mm + flux.melt_mm;
  if (supply >= pet) {
    flux.aet_mm = pet;
    state.soil_water_mm += supply - pet;
    if (state.soil_water_mm > params.awc_mm) {
      flux.runoff_mm = state.soil_water_mm - params.awc_mm;
      state.soil_water_mm = params.awc_mm;
    }
  } else {
    // Soil releases water along the standard drying curve; the release is
    // capped by what is stored, so AET <= PET always.
    double unmet = pet - supply;
    double withdrawal =
        params.awc_mm > 0.0
            ? state.soil_water_mm * (1.0 - std::exp(-unmet / params.awc_mm))
            : state.soil_water_mm;
    withdrawal = std::min(withdrawal, state.soil_water_mm);
    state.soil_water_mm -= withdrawal;
    flux.aet_mm = supply + withdrawal;
  }
  flux.deficit_mm = pet - flux.aet_mm;
  return flux;
}

WaterBalanceSeries run_water_balance(const std::vector<MonthlyClimate>& months,
                                     const WaterBalanceParams& params) {
  if (months.empty()) throw DataError("run_water_balance: empty record");
  std::vector<MonthlyClimate> rec = months;
  std::sort(rec.begin(), rec.end(), [](const MonthlyClimate& a, const MonthlyClimate& b) {
    return a.year != b.year ? a.year < b.year : a.month < b.month;
  });
  const std::string& stand = rec.front().stand_id;
  for (const auto& m : rec) {
    if (m.stand_id != stand) {
      throw DataError("run_water_balance: mixed stands " + stand + " and " + m.stand_id);
    }
  }
  if (rec.front().month != 1 || rec.back().month != 12 || rec.size() % 12 != 0) {
    throw DataError("stand " + stand + ": record must cover whole calendar years");
  }
  for (std::size_t k = 1; k < rec.size(); ++k) {
    int expect_month = rec[k - 1].month % 12 + 1;
    int expect_year = rec[k - 1].year + (rec[k - 1].month == 12 ? 1 : 0);
    if (rec[k].month != expect_month || rec[k].year != expect_year) {
      throw DataError("stand " + stand + ": missing month after " +
                      std::to_string(rec[k - 1].year) + "-" + std::to_string(rec[k - 1].month));
    }
  }

  double latitude = rec.front().latitude_deg;
  std::size_t n_years = rec.size() / 12;
  std::vector<std::array<double, 12>> pet(n_years);
  for (std::size_t y = 0; y < n_years; ++y) {
    std::array<double, 12> tmean{};
    for (int m = 0; m < 12; ++m) tmean[m] = rec[y * 12 + m].tmean_c;
    pet[y] = thornthwaite_pet(tmean, latitude);
  }

  // Spin-up: cycle the first year until snow/soil carryover settles.
  BucketState state;
  for (int cycle = 0; cycle < params.spinup_max_cycles; ++cycle) {
    BucketState before = state;
    for (int m = 0; m < 12; ++m) {
      step_bucket(state, rec[m].tmean_c, rec[m].precip_mm, pet[0][m], params);
    }
    if (std::abs(state.snowpack_mm - before.snowpack_mm) < params.spinup_tol_mm &&
        std::abs(state.soil_water_mm - before.soil_water_mm) < params.spinup_tol_mm) {
      break;
    }
  }

  WaterBalanceSeries out;
  out.stand_id = stand;
  out.latitude_deg = latitude;
  out.params = params;
  out.months.reserve(rec.size());
  for (std::size_t k = 0; k < rec.size(); ++k) {
    const MonthlyClimate& m = rec[k];
    BucketFlux flux = step_bucket(state, m.tmean_c, m.precip_mm, pet[k / 12][k % 12], params);
    WaterBalanceMonth wm;
    wm.year = m.year;
    wm.month = m.month;
    wm.tmin_c = m.tmin_c;
    wm.tmean_c = m.tmean_c;
    wm.tmax_c = m.tmax_c;
    wm.precip_mm = m.precip_mm;
    wm.pet_mm = pet[k / 12][k % 12];
    wm.aet_mm = flux.aet_mm;
    wm.deficit_mm = flux.deficit_mm;
    wm.snowpack_mm = state.snowpack_mm;
    wm.soil_water_mm = state.soil_water_mm;
    wm.runoff_mm = flux.runoff_mm;
    out.months.push_back(wm);
  }
  return out;
}

// ---------------------------------------------------------------------

const std::vector<std::string>& seasonal_variable_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    const char* seasons[5] = {"FAL", "WIN", "SPR", "SUM", "SUM"};
    const char* suffix[5] = {"", "", "", "", "-LAG"};
    for (const char* var : {"TMIN", "TMEAN", "TMAX"}) {
      for (int s = 0; s < 5; ++s) {
        v.push_back(std::string(seasons[s]) + "-" + var + suffix[s]);
      }
    }
    for (const char* var : {"AET", "PET", "DEF"}) {
      for (int s : {0, 2, 3, 4}) {  // no winter totals
        v.push_back(std::string(seasons[s]) + "-" + var + suffix[s]);
      }
    }
    v.push_back("SNOW");
    return v;
  }();
  return names;
}

int SeasonalClimate::var_index(const std::string& name) const {
  auto it = std::find(variables.begin(), variables.end(), name);
  return it == variables.end() ? -1 : static_cast<int>(it - variables.begin());
}

int SeasonalClimate::row_index(const std::string& stand_id, int year) const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].year == year && rows[r].stand_id == stand_id) return static_cast<int>(r);
  }
  return -1;
}

namespace {

// Months of each seasonal window relative to growth year t.
struct WindowMonth {
  int year_offset;  // 0 = year t, -1 = year t-1
  int month;
};

const std::vector<WindowMonth>& window_months(int season) {
  static const std::vector<WindowMonth> fall = {{-1, 9}, {-1, 10}, {-1, 11}};
  static const std::vector<WindowMonth> winter = {{-1, 12}, {0, 1}, {0, 2}};
  static const std::vector<WindowMonth> spring = {{0, 3}, {0, 4}, {0, 5}};
  static const std::vector<WindowMonth> summer = {{0, 6}, {0, 7}, {0, 8}};
  static const std::vector<WindowMonth> summer_lag = {{-1, 6}, {-1, 7}, {-1, 8}};
  switch (season) {
    case 0: return fall;
    case 1: return winter;
    case 2: return spring;
    case 3: return summer;
    default: return summer_lag;
  }
}

}  // namespace

SeasonalClimate aggregate_seasonal(const std::vector<WaterBalanceSeries>& series) {
  SeasonalClimate out;
  out.variables = seasonal_variable_names();

  std::size_t n_rows = 0;
  for (const auto& s : series) n_rows += s.months.size() / 12;
  out.values.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(out.variables.size()));
  out.values.setConstant(std::nan(""));

  for (const auto& wb : series) {
    std::map<std::pair<int, int>, const WaterBalanceMonth*> by_ym;
    for (const auto& m : wb.months) by_ym[{m.year, m.month}] = &m;
    std::set<int> years;
    for (const auto& m : wb.months) years.insert(m.year);

    for (int year : years) {
      Eigen::Index row = static_cast<Eigen::Index>(out.rows.size());
      out.rows.push_back({wb.stand_id, year});

      auto gather = [&](int season, auto&& field) -> std::vector<double> {
        std::vector<double> vals;
        for (const WindowMonth& wm : window_months(season)) {
          auto it = by_ym.find({year + wm.year_offset, wm.month});
          if (it == by_ym.end()) return {};
          vals.push_back(field(*it->second));
        }
        return vals;
      };
      auto put = [&](const std::string& name, const std::vector<double>& vals, bool total) {
        if (vals.empty()) return;  // window incomplete: stays NaN
        double agg = 0;
        for (double v : vals) agg += v;
        if (!total) agg /= static_cast<double>(vals.size());
        out.values(row, out.var_index(name)) = agg;
      };

      const char* season_name[5] = {"FAL", "WIN", "SPR", "SUM", "SUM"};
      const char* season_suffix[5] = {"", "", "", "", "-LAG"};
      for (int s = 0; s < 5; ++s) {
        std::string tag = std::string(season_name[s]);
        std::string suf = season_suffix[s];
        put(tag + "-TMIN" + suf, gather(s, [](const WaterBalanceMonth& m) { return m.tmin_c; }), false);
        put(tag + "-TMEAN" + suf, gather(s, [](const WaterBalanceMonth& m) { return m.tmean_c; }), false);
        put(tag + "-TMAX" + suf, gather(s, [](const WaterBalanceMonth& m) { return m.tmax_c; }), false);
        if (s != 1) {
          put(tag + "-AET" + suf, gather(s, [](const WaterBalanceMonth& m) { return m.aet_mm; }), true);
          put(tag + "-PET" + suf, gather(s, [](const WaterBalanceMonth& m) { return m.pet_mm; }), true);
          put(tag + "-DEF" + suf, gather(s, [](const WaterBalanceMonth& m) { return m.deficit_mm; }), true);
        }
      }
      put("SNOW", gather(1, [](const WaterBalanceMonth& m) { return m.snowpack_mm; }), false);
    }
  }
  return out;
}

SeasonalClimate standardize(const SeasonalClimate& raw) {
  SeasonalClimate out = raw;
  Eigen::Index p = static_cast<Eigen::Index>(raw.variables.size());
  out.mean.resize(p);
  out.sd.resize(p);
  for (Eigen::Index v = 0; v < p; ++v) {
    std::vector<double> vals;
    for (Eigen::Index r = 0; r < raw.values.rows(); ++r) {
      if (!std::isnan(raw.values(r, v))) vals.push_back(raw.values(r, v));
    }
    if (vals.size() < 2) {
      throw DataError("standardize: variable " + raw.variables[v] +
                      " has fewer than 2 stand-year values");
    }
    double m = mean(vals);
    double s = sample_sd(vals);
    if (!(s > 0.0)) {
      throw DataError("standardize: variable " + raw.variables[v] + " has zero variance");
    }
    out.mean[v] = m;
    out.sd[v] = s;
    for (Eigen::Index r = 0; r < raw.values.rows(); ++r) {
      if (!std::isnan(raw.values(r, v))) out.values(r, v) = (raw.values(r, v) - m) / s;
    }
  }
  out.standardized = true;
  return out;
}

SeasonalClimate destandardize(const SeasonalClimate& z) {
  if (!z.standardized || z.mean.size() == 0) {
    throw DataError("destandardize: input has no stored transform parameters");
  }
  SeasonalClimate out = z;
  for (Eigen::Index v = 0; v < z.values.cols(); ++v) {
    for (Eigen::Index r = 0; r < z.values.rows(); ++r) {
      if (!std::isnan(z.values(r, v))) out.values(r, v) = z.values(r, v) * z.sd[v] + z.mean[v];
    }
  }
  out.standardized = false;
  return out;
}

// ---------------------------------------------------------------------

std::vector<MonthlyClimate> read_monthly_climate(const std::string& path) {
  CsvTable t = CsvTable::read_file(path);
  std::vector<MonthlyClimate> out;
  out.reserve(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    MonthlyClimate m;
    m.stand_id = t.cell(r, "stand_id");
    m.year = static_cast<int>(t.integer(r, "year"));
    m.month = static_cast<int>(t.integer(r, "month"));
    m.tmin_c = t.num(r, "tmin_c");
    m.tmean_c = t.num(r, "tmean_c");
    m.tmax_c = t.num(r, "tmax_c");
    m.precip_mm = t.num(r, "precip_mm");
    m.latitude_deg = t.num(r, "latitude");
    if (m.month < 1 || m.month > 12) {
      throw DataError(path + ": stand " + m.stand_id + ": month out of range: " +
                      std::to_string(m.month));
    }
    if (!(m.tmin_c <= m.tmean_c && m.tmean_c <= m.tmax_c)) {
      throw DataError(path + ": stand " + m.stand_id + " " + std::to_string(m.year) + "-" +
                      std::to_string(m.month) + ": requires tmin <= tmean <= tmax");
    }
    if (m.precip_mm < 0) {
      throw DataError(path + ": stand " + m.stand_id + " " + std::to_string(m.year) + "-" +
                      std::to_string(m.month) + ": negative precipitation");
    }
    out.push_back(std::move(m));
  }
  return out;
}

void write_monthly_water_balance(const std::string& path,
                                 const std::vector<WaterBalanceSeries>& series) {
  CsvWriter w(path, {"stand_id", "year", "month", "pet_mm", "aet_mm", "deficit_mm",
                     "snowpack_mm", "soil_water_mm", "runoff_mm"});
  for (const auto& s : series) {
    for (const auto& m : s.months) {
      w.row({s.stand_id, format_number(static_cast<long long>(m.year)),
             format_number(static_cast<long long>(m.month)), format_number(m.pet_mm),
             format_number(m.aet_mm), format_number(m.deficit_mm),
             format_number(m.snowpack_mm), format_number(m.soil_water_mm),
             format_number(m.runoff_mm)});
    }
  }
}

void write_seasonal_csv(const std::string& path, const SeasonalClimate& raw,
                        const SeasonalClimate& z) {
  if (raw.rows.size() != z.rows.size() || raw.variables != z.variables) {
    throw DataError("write_seasonal_csv: raw and standardized tables do not align");
  }
  std::vector<std::string> header = {"stand_id", "year"};
  for (const auto& v : raw.variables) header.push_back(v);
  for (const auto& v : raw.variables) header.push_back(v + "_z");
  CsvWriter w(path, header);
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    std::vector<std::string> cells = {raw.rows[r].stand_id,
                                      format_number(static_cast<long long>(raw.rows[r].year))};
    for (Eigen::Index v = 0; v < raw.values.cols(); ++v) {
      cells.push_back(format_number(raw.values(static_cast<Eigen::Index>(r), v)));
    }
    for (Eigen::Index v = 0; v < z.values.cols(); ++v) {
      cells.push_back(format_number(z.values(static_cast<Eigen::Index>(r), v)));
    }
    w.row(cells);
  }
}

SeasonalClimate read_seasonal_csv(const std::string& path, bool standardized) {
  CsvTable t = CsvTable::read_file(path);
  SeasonalClimate out;
  out.standardized = standardized;
  for (const auto& col : t.header()) {
    if (col == "stand_id" || col == "year") continue;
    if (col.size() > 2 && col.ends_with("_z")) continue;
    out.variables.push_back(col);
  }
  if (out.variables.empty()) throw DataError(path + ": no climate variable columns");
  out.values.resize(static_cast<Eigen::Index>(t.rows()),
                    static_cast<Eigen::Index>(out.variables.size()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    out.rows.push_back({t.cell(r, "stand_id"), static_cast<int>(t.integer(r, "year"))});
    for (std::size_t v = 0; v < out.variables.size(); ++v) {
      std::string col = standardized ? out.variables[v] + "_z" : out.variables[v];
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(v)) =
          t.num(r, t.column(col));
    }
  }
  return out;
}

void write_standardization_params(const std::string& path, const SeasonalClimate& z) {
  if (z.mean.size() == 0) throw DataError("no standardization parameters to write");
  CsvWriter w(path, {"variable", "mean", "sd"});
  for (std::size_t v = 0; v < z.variables.size(); ++v) {
    w.row({z.variables[v], format_number(z.mean[static_cast<Eigen::Index>(v)]),
           format_number(z.sd[static_cast<Eigen::Index>(v)])});
  }
}

}  // namespace dendrostate
