#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace dendrostate {

// One tree's annual growth increments. Years run contiguously from
// first_year; widths are strictly positive so the log transform is
// always defined.
struct RingSeries {
  std::string tree_id;
  std::string stand_id;
  std::string plot_id;
  std::string species_code;
  int recruitment_year = 0;
  int first_year = 0;
  std::vector<double> widths_mm;

  int last_year() const { return first_year + static_cast<int>(widths_mm.size()) - 1; }
  bool has_year(int year) const { return year >= first_year && year <= last_year(); }
  double width(int year) const { return widths_mm.at(static_cast<std::size_t>(year - first_year)); }
  int age_in_year(int year) const { return year - recruitment_year; }

  // Checks strict positivity, non-empty record, recruitment <= first year.
  // Throws DataError naming the tree and offending year.
  void validate() const;
};

struct Stand {
  std::string stand_id;
  std::vector<std::size_t> tree_indices;  // into the owning series vector
  int initiation_year = 0;
};

struct StandTable {
  std::vector<Stand> stands;                    // sorted by stand_id
  std::map<std::string, std::size_t> by_id;

  const Stand& at(const std::string& stand_id) const;
};

struct StudyWindow {
  int start_year = 1897;
  int end_year = 2007;

  int length() const { return end_year - start_year + 1; }
  bool contains(int year) const { return year >= start_year && year <= end_year; }
};

// CSV column names; remappable when ingesting foreign files.
struct RingCsvSchema {
  std::string tree_id = "tree_id";
  std::string stand_id = "stand_id";
  std::string plot_id = "plot_id";
  std::string species = "species";
  std::string recruitment_year = "recruitment_year";
  std::string year = "year";
  std::string width_mm = "width_mm";
};

// Long-format ingestion: one row per tree-year, grouped into one
// RingSeries per tree. Rows may arrive in any order; per-tree years are
// sorted and must form a contiguous run. Unknown species codes append a
// warning (when a sink is given) but do not fail.
std::vector<RingSeries> load_rings(const std::string& path,
                                   const RingCsvSchema& schema = {},
                                   std::vector<std::string>* warnings = nullptr);

void save_rings(const std::string& path, const std::vector<RingSeries>& series,
                const RingCsvSchema& schema = {});

// 25th percentile (lower interpolation) of member trees' recruitment years.
int derive_initiation(const std::vector<int>& recruitment_years);

StandTable build_stand_table(const std::vector<RingSeries>& series);

// Elementwise natural log of the widths, keyed by calendar year.
std::map<int, double> log_growth(const RingSeries& series);

// Table-1 species codes for the study taxa; the registry is only used to
// warn about unrecognized codes.
const std::set<std::string>& default_species_registry();

}  // namespace dendrostate
