#include <doctest.h>

#include <cmath>

#include "dendrostate/csv.hpp"
#include "dendrostate/errors.hpp"
#include "dendrostate/rng.hpp"
#include "dendrostate/stats.hpp"
#include "test_util.hpp"

using namespace dendrostate;

TEST_SUITE("basics") {

TEST_CASE("csv round trip with quoting") {
  testutil::TempDir dir("csv");
  std::string path = dir.file("t.csv");
  {
    CsvWriter w(path, {"a", "b"});
    w.row({"x,1", "2"});
    w.row({"he said \"hi\"", "3.5"});
  }
  CsvTable t = CsvTable::read_file(path);
  CHECK(t.rows() == 2);
  CHECK(t.cell(0, "a") == "x,1");
  CHECK(t.cell(1, "a") == "he said \"hi\"");
  CHECK(t.num(1, t.column("b")) == doctest::Approx(3.5));
}

TEST_CASE("csv missing column reported by name") {
  CsvTable t = CsvTable::parse("a,b\n1,2\n");
  CHECK_THROWS_WITH_AS(t.column("year"), doctest::Contains("year"), DataError);
}

TEST_CASE("csv rejects ragged rows") {
  CHECK_THROWS_AS(CsvTable::parse("a,b\n1\n"), DataError);
}

TEST_CASE("format_number survives the round trip") {
  for (double v : {0.1, -3.25e-17, 1.0 / 3.0, 73.86829548795049, 0.0}) {
    CsvTable t = CsvTable::parse("x\n" + format_number(v) + "\n");
    CHECK(t.num(0, 0) == v);
  }
}

TEST_CASE("lower-interpolation quantile") {
  CHECK(quantile_lower({1900, 1910, 1920, 1930, 1940}, 0.25) == 1910);
  CHECK(quantile_lower({1900, 1900, 1900, 1980}, 0.25) == 1900);
  CHECK(quantile_lower({1950}, 0.25) == 1950);
  // Median of a strictly increasing series of length 10 leaves exactly
  // five values above it.
  std::vector<double> xs;
  for (int i = 1; i <= 10; ++i) xs.push_back(i);
  double thr = quantile_lower(xs, 0.5);
  int above = 0;
  for (double x : xs) {
    if (x > thr) ++above;
  }
  CHECK(above == 5);
}

TEST_CASE("rng determinism and stream separation") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
  Rng s1 = Rng::stream(7, "alpha");
  Rng s2 = Rng::stream(7, "beta");
  bool all_equal = true;
  for (int i = 0; i < 32; ++i) {
    if (s1.uniform() != s2.uniform()) all_equal = false;
  }
  CHECK_FALSE(all_equal);
}

TEST_CASE("gamma and inverse-gaussian moments") {
  Rng rng(11);
  const int n = 200000;
  std::vector<double> g, ig;
  for (int i = 0; i < n; ++i) {
    g.push_back(rng.gamma(3.0, 2.0));
    ig.push_back(rng.inverse_gaussian(2.0, 5.0));
  }
  CHECK(testutil::mean_of(g) == doctest::Approx(1.5).epsilon(0.02));
  CHECK(testutil::var_of(g) == doctest::Approx(0.75).epsilon(0.05));
  // Inverse Gaussian: mean mu, variance mu^3 / lambda.
  CHECK(testutil::mean_of(ig) == doctest::Approx(2.0).epsilon(0.02));
  CHECK(testutil::var_of(ig) == doctest::Approx(8.0 / 5.0).epsilon(0.08));
}

TEST_CASE("uniform stays inside the open interval") {
  Rng rng(3);
  for (int i = 0; i < 100000; ++i) {
    double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

}  // TEST_SUITE
