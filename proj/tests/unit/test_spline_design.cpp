#include <doctest.h>

#include <cmath>
#include <random>

#include "dendrostate/csv.hpp"
#include "dendrostate/design.hpp"
#include "dendrostate/errors.hpp"
#include "test_util.hpp"

using namespace dendrostate;

namespace {

std::vector<double> age_grid(double lo, double hi, int n) {
  std::vector<double> ages;
  for (int i = 0; i < n; ++i) ages.push_back(lo + (hi - lo) * i / (n - 1));
  return ages;
}

SeasonalClimate climate_for(const std::vector<std::string>& stands, int year_lo, int year_hi,
                            const std::vector<std::string>& vars, unsigned seed = 1) {
  SeasonalClimate sc;
  sc.variables = vars;
  std::mt19937 gen(seed);
  std::normal_distribution<double> n01;
  std::vector<Eigen::VectorXd> rows;
  for (const auto& s : stands) {
    for (int y = year_lo; y <= year_hi; ++y) {
      sc.rows.push_back({s, y});
      Eigen::VectorXd v(static_cast<Eigen::Index>(vars.size()));
      for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = n01(gen);
      rows.push_back(v);
    }
  }
  sc.values.resize(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(vars.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) sc.values.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  sc.standardized = true;
  return sc;
}

RingSeries tree(const std::string& id, const std::string& stand, int first, int last,
                double width = 1.0, int recruit = -1) {
  RingSeries t;
  t.tree_id = id;
  t.stand_id = stand;
  t.plot_id = stand + "-P";
  t.species_code = "ABBA";
  t.recruitment_year = recruit < 0 ? first : recruit;
  t.first_year = first;
  t.widths_mm.assign(static_cast<std::size_t>(last - first + 1), width);
  return t;
}

}  // namespace

TEST_SUITE("spline_design") {

TEST_CASE("partition of unity across the age range") {
  SplineBasis basis = build_basis(age_grid(0, 100, 400), {10, 3, 2});
  for (double age : age_grid(0, 100, 173)) {
    CHECK(basis.evaluate(age).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Clamped outside the range too.
  CHECK(basis.evaluate(150.0).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant functions are reproduced exactly") {
  SplineBasis basis = build_basis(age_grid(0, 60, 200), {8, 3, 2});
  // A coefficient vector of ones represents the constant 1.
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(basis.n_basis());
  for (double age : age_grid(0, 60, 57)) {
    CHECK(basis.evaluate(age).dot(ones) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("penalty null space: infinite smoothing tends to a line") {
  auto ages = age_grid(0, 80, 120);
  SplineBasis basis = build_basis(ages, {10, 3, 2});
  Eigen::MatrixXd B = basis.evaluate_all(ages);
  Eigen::MatrixXd K = basis.penalty();
  std::mt19937 gen(4);
  std::normal_distribution<double> noise(0.0, 0.3);
  Eigen::VectorXd y(B.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double x = ages[static_cast<std::size_t>(i)];
    y[i] = 1.5 + 0.02 * x + std::sin(x / 9.0) + noise(gen);
  }
  double lambda = 1e10;
  Eigen::MatrixXd A = B.transpose() * B + lambda * K +
                      1e-8 * Eigen::MatrixXd::Identity(basis.n_basis(), basis.n_basis());
  Eigen::VectorXd coef = A.llt().solve(B.transpose() * y);
  Eigen::VectorXd fitted = B * coef;
  // Compare against the ordinary least squares line (the oracle).
  Eigen::MatrixXd X(B.rows(), 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = ages[static_cast<std::size_t>(i)];
  }
  Eigen::VectorXd line = X * (X.transpose() * X).ldlt().solve(X.transpose() * y);
  CHECK((fitted - line).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("fewer distinct ages than knots") {
  std::vector<double> ages = {1, 1, 2, 2, 3, 3};
  CHECK_THROWS_AS(build_basis(ages, {10, 3, 2}), DataError);
}

TEST_CASE("knots serialize and reload bit-identically") {
  testutil::TempDir dir("spline");
  auto ages = age_grid(0, 90, 300);
  SplineBasis basis = build_basis(ages, {10, 3, 2});
  std::string path = dir.file("knots.csv");
  {
    CsvWriter w(path, {"knot"});
    for (double k : basis.interior_knots()) w.row({format_number(k)});
  }
  CsvTable t = CsvTable::read_file(path);
  std::vector<double> knots;
  for (std::size_t r = 0; r < t.rows(); ++r) knots.push_back(t.num(r, 0));
  SplineBasis rebuilt(basis.age_lo(), basis.age_hi(), knots, basis.degree(),
                      basis.penalty_order());
  Eigen::MatrixXd b1 = basis.evaluate_all(ages);
  Eigen::MatrixXd b2 = rebuilt.evaluate_all(ages);
  CHECK((b1 - b2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assemble: counting example") {
  auto climate = climate_for({"S1"}, 2000, 2002, {"V1", "V2"});
  AssembleOptions opts;
  opts.window = {2000, 2002};
  opts.spline = {1, 1, 1};  // tiny basis for tiny data
  std::vector<RingSeries> rings = {tree("A", "S1", 2000, 2002, 1.0, 1995),
                                   tree("B", "S1", 2000, 2002, 1.0, 1990)};
  ModelDesign d = assemble(rings, climate, {"V1", "V2"}, opts);
  CHECK(d.n_trees() == 2);
  CHECK(d.n_stands() == 1);
  CHECK(d.n_obs() == 6);
  CHECK(d.n_cells() == 3);
  CHECK(d.climate.rows() == 3);
  CHECK(d.climate.cols() == 2);
}

TEST_CASE("assemble: window mask excludes years before the record") {
  auto climate = climate_for({"S1"}, 1897, 2007, {"V1"});
  AssembleOptions opts;
  opts.window = {1897, 2007};
  opts.spline = {2, 3, 2};
  std::vector<RingSeries> rings = {tree("A", "S1", 1990, 2007),
                                   tree("B", "S1", 1897, 2007)};
  ModelDesign d = assemble(rings, climate, {"V1"}, opts);
  auto per_year = d.trees_observed_per_year();
  CHECK(per_year[0] == 1);                      // only tree B in 1897
  CHECK(per_year[1990 - 1897] == 2);            // both from 1990
  CHECK(d.n_obs() == (2007 - 1990 + 1) + 111);  // A: 18 years, B: 111
}

TEST_CASE("assemble: unknown variable and missing stand errors") {
  auto climate = climate_for({"S1"}, 2000, 2002, {"V1"});
  AssembleOptions opts;
  opts.window = {2000, 2002};
  opts.spline = {1, 1, 1};
  std::vector<RingSeries> rings = {tree("A", "S1", 2000, 2002)};
  CHECK_THROWS_WITH_AS(assemble(rings, climate, {"JUL-RAIN"}, opts),
                       doctest::Contains("JUL-RAIN"), DataError);
  std::vector<RingSeries> rings2 = {tree("A", "S2", 2000, 2002)};
  CHECK_THROWS_WITH_AS(assemble(rings2, climate, {"V1"}, opts), doctest::Contains("S2"),
                       DataError);
}

TEST_CASE("assemble: climate-missing years are masked, not zero-filled") {
  auto climate = climate_for({"S1"}, 2000, 2004, {"V1"});
  climate.values(0, 0) = std::nan("");  // S1 year 2000 missing
  AssembleOptions opts;
  opts.window = {2000, 2004};
  opts.spline = {1, 1, 1};
  std::vector<RingSeries> rings = {tree("A", "S1", 2000, 2004)};
  ModelDesign d = assemble(rings, climate, {"V1"}, opts);
  CHECK(d.n_obs() == 4);  // 2001..2004
  CHECK(d.cell_index(0, 0) == -1);
  CHECK(d.cell_index(0, 1) >= 0);
}

TEST_CASE("assemble equals assemble on pre-truncated records") {
  auto climate = climate_for({"S1"}, 1950, 1960, {"V1"});
  AssembleOptions opts;
  opts.window = {1950, 1960};
  opts.spline = {2, 3, 2};
  // One record extends outside the window; the other is pre-truncated.
  RingSeries wide = tree("A", "S1", 1940, 1960, 1.0, 1940);
  RingSeries cut = tree("A", "S1", 1950, 1960, 1.0, 1940);
  for (std::size_t k = 0; k < wide.widths_mm.size(); ++k) {
    wide.widths_mm[k] = 0.5 + 0.05 * static_cast<double>(k);
  }
  for (std::size_t k = 0; k < cut.widths_mm.size(); ++k) {
    cut.widths_mm[k] = wide.widths_mm[k + 10];
  }
  ModelDesign d1 = assemble({wide}, climate, {"V1"}, opts);
  ModelDesign d2 = assemble({cut}, climate, {"V1"}, opts);
  REQUIRE(d1.segments.size() == 1);
  REQUIRE(d2.segments.size() == 1);
  CHECK(d1.segments[0].first_t == d2.segments[0].first_t);
  CHECK((d1.segments[0].log_y - d2.segments[0].log_y).cwiseAbs().maxCoeff() == 0.0);
  // Ages come from recruitment either way, so the bases agree too.
  CHECK((d1.segments[0].B - d2.segments[0].B).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("design summary export") {
  testutil::TempDir dir("design");
  auto climate = climate_for({"S1"}, 2000, 2004, {"V1"});
  AssembleOptions opts;
  opts.window = {2000, 2004};
  opts.spline = {1, 1, 1};
  ModelDesign d = assemble({tree("A", "S1", 2000, 2004)}, climate, {"V1"}, opts);
  std::string path = dir.file("summary.csv");
  write_design_summary(path, d);
  CsvTable t = CsvTable::read_file(path);
  CHECK(t.rows() > 5);
}

}  // TEST_SUITE
