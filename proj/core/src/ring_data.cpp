#include "dendrostate/ring_data.hpp"

#include <algorithm>
#include <cmath>

#include "dendrostate/csv.hpp"
#include "dendrostate/errors.hpp"
#include "dendrostate/stats.hpp"

namespace dendrostate {

void RingSeries::validate() const {
  if (widths_mm.empty()) throw DataError("tree " + tree_id + ": empty ring record");
  for (std::size_t k = 0; k < widths_mm.size(); ++k) {
    if (!(widths_mm[k] > 0.0)) {
      throw DataError("tree " + tree_id + ": non-positive width " +
                      format_number(widths_mm[k]) + " in year " +
                      std::to_string(first_year + static_cast<int>(k)));
    }
  }
  if (recruitment_year > first_year) {
    throw DataError("tree " + tree_id + ": recruitment year " +
                    std::to_string(recruitment_year) + " is after first observed year " +
                    std::to_string(first_year));
  }
}

const Stand& StandTable::at(const std::string& stand_id) const {
  auto it = by_id.find(stand_id);
  if (it == by_id.end()) throw DataError("unknown stand: " + stand_id);
  return stands[it->second];
}

const std::set<std::string>& default_species_registry() {
  static const std::set<std::string> codes = {
      "ABBA", "ACRU", "ACSA", "BEPA", "FRNI", "LALA", "PIGL", "PIMA",
      "PIBA", "PIRE", "PIST", "POGR", "POTR", "QURU", "THOC"};
  return codes;
}

std::vector<RingSeries> load_rings(const std::string& path, const RingCsvSchema& schema,
                                   std::vector<std::string>* warnings) {
  CsvTable t = CsvTable::read_file(path);
  for (const std::string& col : {schema.tree_id, schema.stand_id, schema.plot_id,
                                 schema.species, schema.recruitment_year, schema.year,
                                 schema.width_mm}) {
    t.column(col);  // throws on missing column
  }

  struct Row {
    int year;
    double width;
  };
  struct TreeAcc {
    RingSeries meta;
    std::vector<Row> rows;
  };
  std::map<std::string, TreeAcc> trees;

  for (std::size_t r = 0; r < t.rows(); ++r) {
    const std::string& id = t.cell(r, schema.tree_id);
    auto& acc = trees[id];
    if (acc.rows.empty()) {
      acc.meta.tree_id = id;
      acc.meta.stand_id = t.cell(r, schema.stand_id);
      acc.meta.plot_id = t.cell(r, schema.plot_id);
      acc.meta.species_code = t.cell(r, schema.species);
      acc.meta.recruitment_year = static_cast<int>(t.integer(r, schema.recruitment_year));
    }
    int year = static_cast<int>(t.integer(r, schema.year));
    double width = t.num(r, schema.width_mm);
    if (!(width > 0.0)) {
      throw DataError(path + ": tree " + id + " year " + std::to_string(year) +
                      ": width must be positive, got " + format_number(width));
    }
    acc.rows.push_back({year, width});
  }

  std::vector<RingSeries> out;
  out.reserve(trees.size());
  for (auto& [id, acc] : trees) {
    auto& rows = acc.rows;
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.year < b.year; });
    std::vector<int> gaps;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      if (rows[k].year == rows[k - 1].year) {
        throw DataError(path + ": tree " + id + ": duplicate year " +
                        std::to_string(rows[k].year));
      }
      for (int y = rows[k - 1].year + 1; y < rows[k].year; ++y) gaps.push_back(y);
    }
    if (!gaps.empty()) {
      std::string msg = path + ": tree " + id + ": years are not contiguous, missing";
      for (int y : gaps) msg += " " + std::to_string(y);
      throw DataError(msg);
    }
    acc.meta.first_year = rows.front().year;
    acc.meta.widths_mm.reserve(rows.size());
    for (const Row& row : rows) acc.meta.widths_mm.push_back(row.width);
    acc.meta.validate();
    if (warnings && !default_species_registry().count(acc.meta.species_code)) {
      warnings->push_back("tree " + id + ": species code '" + acc.meta.species_code +
                          "' not in registry");
    }
    out.push_back(std::move(acc.meta));
  }
  return out;
}

void save_rings(const std::string& path, const std::vector<RingSeries>& series,
                const RingCsvSchema& schema) {
  CsvWriter w(path, {schema.tree_id, schema.stand_id, schema.plot_id, schema.species,
                     schema.recruitment_year, schema.year, schema.width_mm});
  for (const RingSeries& s : series) {
    for (std::size_t k = 0; k < s.widths_mm.size(); ++k) {
      w.row({s.tree_id, s.stand_id, s.plot_id, s.species_code,
             format_number(static_cast<long long>(s.recruitment_year)),
             format_number(static_cast<long long>(s.first_year + static_cast<int>(k))),
             format_number(s.widths_mm[k])});
    }
  }
}

int derive_initiation(const std::vector<int>& recruitment_years) {
  if (recruitment_years.empty()) throw DataError("derive_initiation: empty stand");
  std::vector<double> ys(recruitment_years.begin(), recruitment_years.end());
  return static_cast<int>(quantile_lower(std::move(ys), 0.25));
}

StandTable build_stand_table(const std::vector<RingSeries>& series) {
  StandTable table;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < series.size(); ++i) groups[series[i].stand_id].push_back(i);
  for (auto& [id, idx] : groups) {
    Stand stand;
    stand.stand_id = id;
    stand.tree_indices = idx;
    std::vector<int> rec;
    rec.reserve(idx.size());
    for (std::size_t i : idx) rec.push_back(series[i].recruitment_year);
    stand.initiation_year = derive_initiation(rec);
    table.by_id[id] = table.stands.size();
    table.stands.push_back(std::move(stand));
  }
  return table;
}

std::map<int, double> log_growth(const RingSeries& series) {
  series.validate();
  std::map<int, double> out;
  for (std::size_t k = 0; k < series.widths_mm.size(); ++k) {
    out[series.first_year + static_cast<int>(k)] = std::log(series.widths_mm[k]);
  }
  return out;
}

}  // namespace dendrostate
