#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dendrostate/ring_data.hpp"
#include "dendrostate/spline.hpp"
#include "dendrostate/water_balance.hpp"

namespace dendrostate {

// Aligned data structures consumed by the samplers. Observations are
// grouped into contiguous-year segments per tree (the AR1 whitening
// operates on contiguous runs); stand-year cells with at least one
// observation define where the stand effects live.
struct ModelDesign {
  std::vector<std::string> tree_ids;
  std::vector<std::string> tree_species;
  std::vector<int> tree_recruitment;
  std::vector<int> tree_stand;  // j(i)

  std::vector<std::string> stand_ids;
  std::vector<int> stand_initiation;

  StudyWindow window;
  int n_years = 0;  // year index t = year - window.start_year

  SplineBasis basis;

  struct Segment {
    int tree = 0;
    int stand = 0;
    int first_t = 0;
    Eigen::MatrixXd B;      // rows x n_basis
    Eigen::VectorXd log_y;  // rows
    std::vector<double> ages;
    int rows() const { return static_cast<int>(log_y.size()); }
  };
  std::vector<Segment> segments;                    // sorted by tree, then year
  std::vector<std::pair<int, int>> tree_segments;   // per tree: [begin, end) in segments

  // Stand-year cells with observations, stand-major then year. The alpha
  // vector in the samplers follows this order.
  std::vector<std::pair<int, int>> cells;  // (stand j, year t)
  std::vector<int> cell_of;                // j * n_years + t -> cell index or -1
  std::vector<std::vector<int>> stand_years;  // per stand: sorted year indices

  std::vector<std::string> climate_vars;  // selected, length p
  // Standardized climate rows aligned with `cells`.
  Eigen::MatrixXd climate;  // n_cells x p

  int n_trees() const { return static_cast<int>(tree_ids.size()); }
  int n_stands() const { return static_cast<int>(stand_ids.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_obs() const;
  int cell_index(int stand, int t) const {
    int idx = cell_of[static_cast<std::size_t>(stand) * static_cast<std::size_t>(n_years) +
                      static_cast<std::size_t>(t)];
    return idx;
  }
  // Observation counts per year (for audit and staggered-recruitment checks).
  std::vector<int> trees_observed_per_year() const;
};

struct AssembleOptions {
  SplineOptions spline;
  StudyWindow window;
};

// Aligns ring series with standardized climate for the selected
// variables. Tree-years outside the study window, or in stand-years
// whose selected climate values are missing, are masked out. Throws
// DataError for a stand with no climate at all or an unknown variable.
ModelDesign assemble(const std::vector<RingSeries>& rings, const SeasonalClimate& climate,
                     const std::vector<std::string>& selected_vars,
                     const AssembleOptions& opts);

// Audit export: dimensions, knots, per-stand observation counts.
void write_design_summary(const std::string& path, const ModelDesign& design);

}  // namespace dendrostate
