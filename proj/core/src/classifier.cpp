#include "dendrostate/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dendrostate/csv.hpp"
#include "dendrostate/errors.hpp"
#include "dendrostate/stats.hpp"

namespace dendrostate {

double ThresholdConfig::quantile_for(const std::string& variable) const {
  auto it = quantiles.find(variable);
  return it == quantiles.end() ? fallback : it->second;
}

ThresholdConfig ThresholdConfig::defaults() {
  ThresholdConfig c;
  c.quantiles = {{"SUM-DEF", 0.95},
                 {"SUM-DEF-LAG", 0.95},
                 {"FAL-DEF", 0.98},
                 {"SPR-DEF", 0.85},
                 {"SNOW", 0.85}};
  return c;
}

void ThresholdConfig::validate() const {
  for (const auto& [name, q] : quantiles) {
    if (!(q > 0.0 && q < 1.0)) {
      throw ConfigError("threshold quantile for " + name + " must be in (0,1)");
    }
  }
  if (!(fallback > 0.0 && fallback < 1.0)) {
    throw ConfigError("threshold fallback quantile must be in (0,1)");
  }
}

bool DisturbanceCalendar::in_outbreak(int year) const {
  for (const auto& iv : outbreaks) {
    if (year >= iv.start_year && year <= iv.end_year) return true;
  }
  return false;
}

void DisturbanceCalendar::validate() const {
  for (std::size_t i = 0; i < outbreaks.size(); ++i) {
    if (outbreaks[i].start_year > outbreaks[i].end_year) {
      throw DataError("disturbance interval runs backwards");
    }
    if (i > 0 && outbreaks[i].start_year <= outbreaks[i - 1].end_year) {
      throw DataError("disturbance intervals must be sorted and non-overlapping");
    }
  }
}

DisturbanceCalendar DisturbanceCalendar::parse(const std::string& text,
                                               const std::string& origin) {
  DisturbanceCalendar cal;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    if (kind == "outbreak") {
      Interval iv;
      if (!(ls >> iv.start_year >> iv.end_year)) {
        throw DataError(origin + ":" + std::to_string(lineno) +
                        ": expected 'outbreak START END'");
      }
      cal.outbreaks.push_back(iv);
    } else if (kind == "host") {
      std::string code;
      if (!(ls >> code)) {
        throw DataError(origin + ":" + std::to_string(lineno) + ": expected 'host CODE'");
      }
      cal.host_species.insert(code);
    } else {
      throw DataError(origin + ":" + std::to_string(lineno) + ": unknown directive '" +
                      kind + "'");
    }
  }
  std::sort(cal.outbreaks.begin(), cal.outbreaks.end(),
            [](const Interval& a, const Interval& b) { return a.start_year < b.start_year; });
  cal.validate();
  return cal;
}

DisturbanceCalendar DisturbanceCalendar::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open calendar file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

DisturbanceCalendar DisturbanceCalendar::ftc_defaults() {
  DisturbanceCalendar cal;
  cal.outbreaks = {{1951, 1959}, {1964, 1972}, {1989, 1995}, {2000, 2006}};
  cal.host_species = {"ACSA", "BEPA", "POGR", "POTR", "QURU"};
  return cal;
}

const char* to_string(ResponseCategory c) {
  switch (c) {
    case ResponseCategory::zero: return "zero";
    case ResponseCategory::weak: return "weak";
    case ResponseCategory::threshold: return "threshold";
    case ResponseCategory::persistent: return "persistent";
    case ResponseCategory::disturbance: return "disturbance";
    case ResponseCategory::unknown: return "unknown";
  }
  return "zero";
}

ResponseCategory response_category_from_string(const std::string& s) {
  if (s == "zero") return ResponseCategory::zero;
  if (s == "weak") return ResponseCategory::weak;
  if (s == "threshold") return ResponseCategory::threshold;
  if (s == "persistent") return ResponseCategory::persistent;
  if (s == "disturbance") return ResponseCategory::disturbance;
  if (s == "unknown") return ResponseCategory::unknown;
  throw DataError("unknown response category: " + s);
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows) {
  CsvWriter w(path, {"year", "variable", "post_mean", "q2.5", "q97.5", "r2_annual"});
  for (const auto& r : rows) {
    w.row({format_number(static_cast<long long>(r.year)), r.variable,
           format_number(r.post_mean), format_number(r.ci_low), format_number(r.ci_high),
           format_number(r.r2_annual)});
  }
}

std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path) {
  CsvTable t = CsvTable::read_file(path);
  std::vector<TrajectoryRow> rows;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    TrajectoryRow row;
    row.year = static_cast<int>(t.integer(r, "year"));
    row.variable = t.cell(r, "variable");
    row.post_mean = t.num(r, t.column("post_mean"));
    row.ci_low = t.num(r, t.column("q2.5"));
    row.ci_high = t.num(r, t.column("q97.5"));
    row.r2_annual = t.num(r, t.column("r2_annual"));
    rows.push_back(std::move(row));
  }
  return rows;
}

double annual_r2(const ModelDesign& design, const Eigen::VectorXd& alpha_mean,
                 const Eigen::MatrixXd& theta_mean, int t, int half_width) {
  int lo = std::max(0, t - half_width);
  int hi = std::min(design.n_years - 1, t + half_width);
  std::vector<double> alphas;
  std::vector<double> fits;
  for (int c = 0; c < design.n_cells(); ++c) {
    int s = design.cells[static_cast<std::size_t>(c)].second;
    if (s < lo || s > hi) continue;
    alphas.push_back(alpha_mean[c]);
    fits.push_back(design.climate.row(c).dot(theta_mean.row(t)));
  }
  if (alphas.empty()) return std::nan("");
  double abar = mean(alphas);
  double ss_tot = 0, ss_res = 0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    ss_tot += (alphas[i] - abar) * (alphas[i] - abar);
    ss_res += (alphas[i] - fits[i]) * (alphas[i] - fits[i]);
  }
  if (!(ss_tot > 0)) return std::nan("");
  return 1.0 - ss_res / ss_tot;
}

AnnualClimate stand_mean_climate(const SeasonalClimate& raw) {
  AnnualClimate out;
  out.variables = raw.variables;
  std::vector<int> years;
  for (const auto& r : raw.rows) years.push_back(r.year);
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());
  out.years = years;
  out.values.resize(static_cast<Eigen::Index>(years.size()),
                    static_cast<Eigen::Index>(raw.variables.size()));
  out.values.setConstant(std::nan(""));
  for (std::size_t yi = 0; yi < years.size(); ++yi) {
    for (std::size_t v = 0; v < raw.variables.size(); ++v) {
      double sum = 0;
      int n = 0;
      for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        if (raw.rows[r].year != years[yi]) continue;
        double val = raw.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(v));
        if (std::isnan(val)) continue;
        sum += val;
        ++n;
      }
      if (n > 0) {
        out.values(static_cast<Eigen::Index>(yi), static_cast<Eigen::Index>(v)) =
            sum / static_cast<double>(n);
      }
    }
  }
  return out;
}

int AnnualClimate::var_index(const std::string& name) const {
  auto it = std::find(variables.begin(), variables.end(), name);
  return it == variables.end() ? -1 : static_cast<int>(it - variables.begin());
}

namespace {

std::vector<int> exceedance_years(const AnnualClimate& climate, int var, double quantile) {
  std::vector<double> values;
  for (Eigen::Index y = 0; y < climate.values.rows(); ++y) {
    double v = climate.values(y, var);
    if (!std::isnan(v)) values.push_back(v);
  }
  std::vector<int> years;
  if (values.empty()) return years;
  double threshold = quantile_lower(values, quantile);
  for (std::size_t y = 0; y < climate.years.size(); ++y) {
    double v = climate.values(static_cast<Eigen::Index>(y), var);
    if (!std::isnan(v) && v > threshold) years.push_back(climate.years[y]);
  }
  return years;
}

double exceedance_threshold(const AnnualClimate& climate, int var, double quantile) {
  std::vector<double> values;
  for (Eigen::Index y = 0; y < climate.values.rows(); ++y) {
    double v = climate.values(y, var);
    if (!std::isnan(v)) values.push_back(v);
  }
  if (values.empty()) return std::nan("");
  return quantile_lower(values, quantile);
}

}  // namespace

std::vector<ResponseLabel> classify(const std::vector<TrajectoryRow>& trajectory,
                                    const ThresholdConfig& thresholds,
                                    const AnnualClimate& climate,
                                    const DisturbanceCalendar& calendar,
                                    const ClassifierConfig& config) {
  thresholds.validate();
  calendar.validate();

  // Group trajectory points by variable, sorted by year.
  std::map<std::string, std::vector<const TrajectoryRow*>> by_var;
  for (const auto& row : trajectory) by_var[row.variable].push_back(&row);
  for (auto& [name, rows] : by_var) {
    std::sort(rows.begin(), rows.end(),
              [](const TrajectoryRow* a, const TrajectoryRow* b) { return a->year < b->year; });
  }

  std::vector<ResponseLabel> labels;
  for (auto& [var, rows] : by_var) {
    int vi = climate.var_index(var);
    std::vector<int> exceed;
    if (vi >= 0) exceed = exceedance_years(climate, vi, thresholds.quantile_for(var));

    auto near_exceedance = [&](int year) {
      for (int e : exceed) {
        if (std::abs(year - e) <= config.window_half_width) return true;
      }
      return false;
    };

    // First pass: sensitivity per year.
    std::map<int, bool> sensitive;
    for (const TrajectoryRow* row : rows) {
      bool excludes_zero = row->ci_low > 0.0 || row->ci_high < 0.0;
      bool strong = excludes_zero && !std::isnan(row->r2_annual) &&
                    row->r2_annual >= config.r2_cut;
      sensitive[row->year] = strong;
    }

    for (const TrajectoryRow* row : rows) {
      ResponseLabel label;
      label.variable = var;
      label.year = row->year;
      label.ci_low = row->ci_low;
      label.ci_high = row->ci_high;
      label.r2_annual = row->r2_annual;

      bool excludes_zero = row->ci_low > 0.0 || row->ci_high < 0.0;
      if (!excludes_zero || std::isnan(row->r2_annual)) {
        // Undefined r2 (constant window) also lands in the zero class.
        label.category = ResponseCategory::zero;
        labels.push_back(label);
        continue;
      }
      if (row->r2_annual < config.r2_cut) {
        label.category = ResponseCategory::weak;
        labels.push_back(label);
        continue;
      }

      bool is_threshold = near_exceedance(row->year);
      // Persistent: the contiguous run of sensitive years leading into
      // this one began within an exceedance window.
      bool is_persistent = false;
      if (!is_threshold) {
        int y = row->year - 1;
        while (sensitive.count(y) && sensitive.at(y)) {
          if (near_exceedance(y)) {
            is_persistent = true;
            break;
          }
          --y;
        }
      }
      bool is_disturbance = calendar.in_outbreak(row->year);

      label.category = ResponseCategory::unknown;
      for (ResponseCategory rule : config.priority) {
        if (rule == ResponseCategory::threshold && is_threshold) {
          label.category = rule;
          break;
        }
        if (rule == ResponseCategory::persistent && is_persistent) {
          label.category = rule;
          break;
        }
        if (rule == ResponseCategory::disturbance && is_disturbance) {
          label.category = rule;
          break;
        }
      }
      labels.push_back(label);
    }
  }
  return labels;
}

std::vector<ExceedanceRecord> exceedance_report(const AnnualClimate& climate,
                                                const ThresholdConfig& thresholds,
                                                const std::vector<ResponseLabel>& labels,
                                                int half_width) {
  thresholds.validate();
  std::vector<ExceedanceRecord> records;
  for (std::size_t v = 0; v < climate.variables.size(); ++v) {
    const std::string& var = climate.variables[v];
    double q = thresholds.quantile_for(var);
    ExceedanceRecord rec;
    rec.variable = var;
    rec.threshold = exceedance_threshold(climate, static_cast<int>(v), q);
    rec.years = exceedance_years(climate, static_cast<int>(v), q);
    for (int e : rec.years) {
      bool responded = false;
      for (const auto& label : labels) {
        if (label.variable != var) continue;
        if (label.category != ResponseCategory::threshold) continue;
        if (std::abs(label.year - e) <= half_width) {
          responded = true;
          break;
        }
      }
      rec.responded.push_back(responded);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<PartialResidualRow> partial_residuals(
    const ModelDesign& design, const std::vector<Eigen::VectorXd>& fitted_trend_mean,
    const Eigen::VectorXd& alpha_mean, int year_lo, int year_hi,
    const std::set<std::string>& host_species, double stand_fraction) {
  if (year_lo > year_hi || !design.window.contains(year_lo) || !design.window.contains(year_hi)) {
    throw DataError("partial_residuals: year range outside the study window");
  }
  int t_lo = year_lo - design.window.start_year;
  int t_hi = year_hi - design.window.start_year;

  // Rank stands by mean stand effect over the range.
  std::vector<std::pair<double, int>> scores;
  for (int j = 0; j < design.n_stands(); ++j) {
    double sum = 0;
    int n = 0;
    for (int t = t_lo; t <= t_hi; ++t) {
      int cell = design.cell_index(j, t);
      if (cell >= 0) {
        sum += alpha_mean[cell];
        ++n;
      }
    }
    if (n > 0) scores.emplace_back(sum / n, j);
  }
  std::sort(scores.begin(), scores.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return design.stand_ids[static_cast<std::size_t>(a.second)] <
           design.stand_ids[static_cast<std::size_t>(b.second)];
  });
  std::size_t n_select = static_cast<std::size_t>(
      std::ceil(stand_fraction * static_cast<double>(design.n_stands())));
  n_select = std::min(n_select, scores.size());
  std::set<int> selected;
  for (std::size_t i = 0; i < n_select; ++i) selected.insert(scores[i].second);

  std::vector<PartialResidualRow> rows;
  for (std::size_t s = 0; s < design.segments.size(); ++s) {
    const auto& seg = design.segments[s];
    if (!selected.count(seg.stand)) continue;
    for (int r = 0; r < seg.rows(); ++r) {
      int t = seg.first_t + r;
      if (t < t_lo || t > t_hi) continue;
      PartialResidualRow row;
      row.tree_id = design.tree_ids[static_cast<std::size_t>(seg.tree)];
      row.stand_id = design.stand_ids[static_cast<std::size_t>(seg.stand)];
      row.host = host_species.count(design.tree_species[static_cast<std::size_t>(seg.tree)]) > 0;
      row.year = design.window.start_year + t;
      row.residual = seg.log_y[r] - fitted_trend_mean[s][r];
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<InitiationCurvePoint> initiation_curve(const std::vector<ResponseLabel>& labels,
                                                   const ModelDesign& design) {
  auto is_sensitive = [](ResponseCategory c) {
    return c == ResponseCategory::threshold || c == ResponseCategory::persistent ||
           c == ResponseCategory::disturbance || c == ResponseCategory::unknown;
  };

  std::vector<InitiationCurvePoint> points;
  for (const std::string& set_name : {std::string("unknown"), std::string("all")}) {
    std::vector<int> ages;
    for (const auto& label : labels) {
      bool include = set_name == "all" ? is_sensitive(label.category)
                                       : label.category == ResponseCategory::unknown;
      if (!include) continue;
      int t = label.year - design.window.start_year;
      if (t < 0 || t >= design.n_years) continue;
      for (int j = 0; j < design.n_stands(); ++j) {
        if (design.cell_index(j, t) < 0) continue;  // stand not observed that year
        ages.push_back(label.year - design.stand_initiation[static_cast<std::size_t>(j)]);
      }
    }
    std::sort(ages.begin(), ages.end());
    std::size_t n = ages.size();
    if (n == 0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      if (i + 1 < n && ages[i + 1] == ages[i]) continue;  // last duplicate carries the step
      InitiationCurvePoint pt;
      pt.label_set = set_name;
      pt.years_since_initiation = ages[i];
      pt.cumulative_fraction = static_cast<double>(i + 1) / static_cast<double>(n);
      points.push_back(pt);
    }
  }
  return points;
}

void write_labels_csv(const std::string& path, const std::vector<ResponseLabel>& labels) {
  CsvWriter w(path, {"variable", "year", "category", "ci_low", "ci_high", "r2_annual"});
  for (const auto& l : labels) {
    w.row({l.variable, format_number(static_cast<long long>(l.year)), to_string(l.category),
           format_number(l.ci_low), format_number(l.ci_high), format_number(l.r2_annual)});
  }
}

std::vector<ResponseLabel> read_labels_csv(const std::string& path) {
  CsvTable t = CsvTable::read_file(path);
  std::vector<ResponseLabel> labels;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    ResponseLabel l;
    l.variable = t.cell(r, "variable");
    l.year = static_cast<int>(t.integer(r, "year"));
    l.category = response_category_from_string(t.cell(r, "category"));
    l.ci_low = t.num(r, t.column("ci_low"));
    l.ci_high = t.num(r, t.column("ci_high"));
    l.r2_annual = t.num(r, t.column("r2_annual"));
    labels.push_back(std::move(l));
  }
  return labels;
}

void write_exceedances_csv(const std::string& path,
                           const std::vector<ExceedanceRecord>& records) {
  CsvWriter w(path, {"variable", "threshold", "year", "responded"});
  for (const auto& rec : records) {
    for (std::size_t i = 0; i < rec.years.size(); ++i) {
      w.row({rec.variable, format_number(rec.threshold),
             format_number(static_cast<long long>(rec.years[i])),
             rec.responded[i] ? "1" : "0"});
    }
  }
}

void write_partial_residuals_csv(const std::string& path,
                                 const std::vector<PartialResidualRow>& rows) {
  CsvWriter w(path, {"tree_id", "stand_id", "host", "year", "residual"});
  for (const auto& r : rows) {
    w.row({r.tree_id, r.stand_id, r.host ? "1" : "0",
           format_number(static_cast<long long>(r.year)), format_number(r.residual)});
  }
}

void write_initiation_curve_csv(const std::string& path,
                                const std::vector<InitiationCurvePoint>& points) {
  CsvWriter w(path, {"label_set", "years_since_initiation", "cumulative_fraction"});
  for (const auto& p : points) {
    w.row({p.label_set, format_number(static_cast<long long>(p.years_since_initiation)),
           format_number(p.cumulative_fraction)});
  }
}

}  // namespace dendrostate
