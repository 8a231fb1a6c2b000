#include "dendrostate/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dendrostate/csv.hpp"
#include "dendrostate/errors.hpp"

namespace dendrostate {

int ModelDesign::n_obs() const {
  int n = 0;
  for (const auto& seg : segments) n += seg.rows();
  return n;
}

std::vector<int> ModelDesign::trees_observed_per_year() const {
  std::vector<int> counts(static_cast<std::size_t>(n_years), 0);
  for (const auto& seg : segments) {
    for (int r = 0; r < seg.rows(); ++r) counts[static_cast<std::size_t>(seg.first_t + r)]++;
  }
  return counts;
}

ModelDesign assemble(const std::vector<RingSeries>& rings, const SeasonalClimate& climate,
                     const std::vector<std::string>& selected_vars,
                     const AssembleOptions& opts) {
  if (rings.empty()) throw DataError("assemble: no ring series");
  if (selected_vars.empty()) throw DataError("assemble: no climate variables selected");

  ModelDesign d;
  d.window = opts.window;
  d.n_years = opts.window.length();
  if (d.n_years < 1) throw ConfigError("assemble: study window is empty");

  std::vector<int> var_cols;
  for (const auto& name : selected_vars) {
    int v = climate.var_index(name);
    if (v < 0) throw DataError("assemble: unknown climate variable '" + name + "'");
    var_cols.push_back(v);
  }
  d.climate_vars = selected_vars;

  StandTable stands = build_stand_table(rings);
  for (const auto& s : stands.stands) {
    d.stand_ids.push_back(s.stand_id);
    d.stand_initiation.push_back(s.initiation_year);
  }

  // Climate availability per (stand, year): all selected variables present.
  const int T = d.n_years;
  const int k = static_cast<int>(d.stand_ids.size());
  Eigen::MatrixXd f_all(static_cast<Eigen::Index>(k) * T, static_cast<Eigen::Index>(var_cols.size()));
  std::vector<std::uint8_t> f_ok(static_cast<std::size_t>(k) * static_cast<std::size_t>(T), 0);
  std::map<std::string, bool> stand_has_any;
  for (const auto& s : d.stand_ids) stand_has_any[s] = false;
  for (std::size_t r = 0; r < climate.rows.size(); ++r) {
    auto it = stands.by_id.find(climate.rows[r].stand_id);
    if (it == stands.by_id.end()) continue;
    int j = static_cast<int>(it->second);
    stand_has_any[climate.rows[r].stand_id] = true;
    int year = climate.rows[r].year;
    if (!opts.window.contains(year)) continue;
    int t = year - opts.window.start_year;
    bool ok = true;
    for (std::size_t v = 0; v < var_cols.size(); ++v) {
      double val = climate.values(static_cast<Eigen::Index>(r), var_cols[v]);
      if (std::isnan(val)) ok = false;
      f_all(static_cast<Eigen::Index>(j) * T + t, static_cast<Eigen::Index>(v)) = val;
    }
    f_ok[static_cast<std::size_t>(j) * static_cast<std::size_t>(T) + static_cast<std::size_t>(t)] =
        ok ? 1 : 0;
  }
  for (const auto& [stand_id, seen] : stand_has_any) {
    if (!seen) throw DataError("assemble: stand " + stand_id + " has no climate rows");
  }

  // Pooled ages of all kept observations drive the knot placement.
  std::vector<double> pooled_ages;
  struct RawSeg {
    int tree, stand, first_t;
    std::vector<double> ages, logy;
  };
  std::vector<RawSeg> raw_segments;
  std::vector<std::pair<int, int>> tree_seg_range;

  for (const RingSeries& tree : rings) {
    tree.validate();
    int i = static_cast<int>(d.tree_ids.size());
    d.tree_ids.push_back(tree.tree_id);
    d.tree_species.push_back(tree.species_code);
    d.tree_recruitment.push_back(tree.recruitment_year);
    int j = static_cast<int>(stands.by_id.at(tree.stand_id));
    d.tree_stand.push_back(j);

    int seg_begin = static_cast<int>(raw_segments.size());
    RawSeg cur{i, j, -1, {}, {}};
    for (int year = std::max(tree.first_year, opts.window.start_year);
         year <= std::min(tree.last_year(), opts.window.end_year); ++year) {
      int t = year - opts.window.start_year;
      bool keep = f_ok[static_cast<std::size_t>(j) * static_cast<std::size_t>(T) +
                       static_cast<std::size_t>(t)] != 0;
      if (keep) {
        if (cur.first_t < 0) cur.first_t = t;
        if (cur.first_t + static_cast<int>(cur.ages.size()) != t) {
          raw_segments.push_back(std::move(cur));
          cur = RawSeg{i, j, t, {}, {}};
        }
        double age = static_cast<double>(tree.age_in_year(year));
        cur.ages.push_back(age);
        cur.logy.push_back(std::log(tree.width(year)));
        pooled_ages.push_back(age);
      } else if (cur.first_t >= 0 && !cur.ages.empty()) {
        raw_segments.push_back(std::move(cur));
        cur = RawSeg{i, j, -1, {}, {}};
      }
    }
    if (cur.first_t >= 0 && !cur.ages.empty()) raw_segments.push_back(std::move(cur));
    tree_seg_range.emplace_back(seg_begin, static_cast<int>(raw_segments.size()));
  }
  if (pooled_ages.empty()) {
    throw DataError("assemble: no observations inside the study window with climate");
  }

  d.basis = build_basis(pooled_ages, opts.spline);

  for (const RawSeg& rs : raw_segments) {
    ModelDesign::Segment seg;
    seg.tree = rs.tree;
    seg.stand = rs.stand;
    seg.first_t = rs.first_t;
    seg.ages = rs.ages;
    seg.B = d.basis.evaluate_all(rs.ages);
    seg.log_y = Eigen::Map<const Eigen::VectorXd>(rs.logy.data(),
                                                  static_cast<Eigen::Index>(rs.logy.size()));
    d.segments.push_back(std::move(seg));
  }
  d.tree_segments = tree_seg_range;

  // Observed stand-year cells.
  std::vector<std::vector<std::uint8_t>> seen(static_cast<std::size_t>(k),
                                              std::vector<std::uint8_t>(static_cast<std::size_t>(T), 0));
  for (const auto& seg : d.segments) {
    for (int r = 0; r < seg.rows(); ++r) {
      seen[static_cast<std::size_t>(seg.stand)][static_cast<std::size_t>(seg.first_t + r)] = 1;
    }
  }
  d.cell_of.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(T), -1);
  d.stand_years.resize(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    for (int t = 0; t < T; ++t) {
      if (seen[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)]) {
        d.cell_of[static_cast<std::size_t>(j) * static_cast<std::size_t>(T) +
                  static_cast<std::size_t>(t)] = static_cast<int>(d.cells.size());
        d.cells.emplace_back(j, t);
        d.stand_years[static_cast<std::size_t>(j)].push_back(t);
      }
    }
  }
  d.climate.resize(static_cast<Eigen::Index>(d.cells.size()),
                   static_cast<Eigen::Index>(var_cols.size()));
  for (std::size_t c = 0; c < d.cells.size(); ++c) {
    auto [j, t] = d.cells[c];
    d.climate.row(static_cast<Eigen::Index>(c)) = f_all.row(static_cast<Eigen::Index>(j) * T + t);
  }
  return d;
}

void write_design_summary(const std::string& path, const ModelDesign& design) {
  CsvWriter w(path, {"kind", "name", "value"});
  auto kv = [&](const std::string& kind, const std::string& name, const std::string& value) {
    w.row({kind, name, value});
  };
  kv("dim", "n_trees", format_number(static_cast<long long>(design.n_trees())));
  kv("dim", "n_stands", format_number(static_cast<long long>(design.n_stands())));
  kv("dim", "n_years", format_number(static_cast<long long>(design.n_years)));
  kv("dim", "n_cells", format_number(static_cast<long long>(design.n_cells())));
  kv("dim", "n_obs", format_number(static_cast<long long>(design.n_obs())));
  kv("dim", "n_basis", format_number(static_cast<long long>(design.basis.n_basis())));
  kv("window", "start_year", format_number(static_cast<long long>(design.window.start_year)));
  kv("window", "end_year", format_number(static_cast<long long>(design.window.end_year)));
  kv("spline", "degree", format_number(static_cast<long long>(design.basis.degree())));
  kv("spline", "penalty_order",
     format_number(static_cast<long long>(design.basis.penalty_order())));
  kv("spline", "age_lo", format_number(design.basis.age_lo()));
  kv("spline", "age_hi", format_number(design.basis.age_hi()));
  for (std::size_t i = 0; i < design.basis.interior_knots().size(); ++i) {
    kv("knot", format_number(static_cast<long long>(i)),
       format_number(design.basis.interior_knots()[i]));
  }
  for (const auto& v : design.climate_vars) kv("variable", v, "selected");
  auto per_year = design.trees_observed_per_year();
  for (int t = 0; t < design.n_years; ++t) {
    kv("trees_in_year", format_number(static_cast<long long>(design.window.start_year + t)),
       format_number(static_cast<long long>(per_year[static_cast<std::size_t>(t)])));
  }
}

}  // namespace dendrostate
