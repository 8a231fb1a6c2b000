#include "dendrostate/spline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dendrostate/errors.hpp"
#include "dendrostate/stats.hpp"

namespace dendrostate {

SplineBasis::SplineBasis(double age_lo, double age_hi, std::vector<double> interior_knots,
                         int degree, int penalty_order)
    : lo_(age_lo), hi_(age_hi), interior_knots_(std::move(interior_knots)),
      degree_(degree), penalty_order_(penalty_order) {
  if (!(lo_ < hi_)) throw DataError("spline basis: age range is degenerate");
  if (degree_ < 1) throw ConfigError("spline degree must be >= 1");
  if (penalty_order_ < 1 || penalty_order_ >= n_basis()) {
    throw ConfigError("spline penalty order must be in [1, n_basis)");
  }
  for (std::size_t k = 0; k < interior_knots_.size(); ++k) {
    if (interior_knots_[k] <= lo_ || interior_knots_[k] >= hi_) {
      throw DataError("interior knot outside the open age range");
    }
    if (k > 0 && interior_knots_[k] <= interior_knots_[k - 1]) {
      throw DataError("interior knots must be strictly increasing");
    }
  }
  knots_.assign(static_cast<std::size_t>(degree_ + 1), lo_);
  knots_.insert(knots_.end(), interior_knots_.begin(), interior_knots_.end());
  knots_.insert(knots_.end(), static_cast<std::size_t>(degree_ + 1), hi_);
}

Eigen::VectorXd SplineBasis::evaluate(double age) const {
  double x = std::clamp(age, lo_, hi_);
  int n = n_basis();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);

  // Span search: largest i with knots_[i] <= x < knots_[i+1]; the last
  // nonempty span is closed on the right.
  int lo_span = degree_;
  int hi_span = n;  // == knots_.size() - degree_ - 1
  int span;
  if (x >= knots_[static_cast<std::size_t>(hi_span)]) {
    span = hi_span - 1;
  } else {
    span = static_cast<int>(std::upper_bound(knots_.begin() + lo_span,
                                             knots_.begin() + hi_span, x) -
                            knots_.begin()) - 1;
  }

  // de Boor recursion for the degree+1 nonzero functions on the span.
  std::vector<double> N(static_cast<std::size_t>(degree_) + 1, 0.0);
  std::vector<double> left(N.size()), right(N.size());
  N[0] = 1.0;
  for (int j = 1; j <= degree_; ++j) {
    left[static_cast<std::size_t>(j)] = x - knots_[static_cast<std::size_t>(span + 1 - j)];
    right[static_cast<std::size_t>(j)] = knots_[static_cast<std::size_t>(span + j)] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
      double temp = denom != 0.0 ? N[static_cast<std::size_t>(r)] / denom : 0.0;
      N[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
      saved = left[static_cast<std::size_t>(j - r)] * temp;
    }
    N[static_cast<std::size_t>(j)] = saved;
  }
  for (int r = 0; r <= degree_; ++r) {
    int idx = span - degree_ + r;
    if (idx >= 0 && idx < n) out[idx] = N[static_cast<std::size_t>(r)];
  }
  return out;
}

Eigen::MatrixXd SplineBasis::evaluate_all(const std::vector<double>& ages) const {
  Eigen::MatrixXd B(static_cast<Eigen::Index>(ages.size()), n_basis());
  for (std::size_t r = 0; r < ages.size(); ++r) {
    B.row(static_cast<Eigen::Index>(r)) = evaluate(ages[r]).transpose();
  }
  return B;
}

Eigen::MatrixXd SplineBasis::penalty() const {
  int n = n_basis();
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(n, n);
  for (int order = 0; order < penalty_order_; ++order) {
    Eigen::Index rows = D.rows() - 1;
    Eigen::MatrixXd Dn(rows, n);
    for (Eigen::Index r = 0; r < rows; ++r) {
      Dn.row(r) = D.row(r + 1) - D.row(r);
    }
    D = std::move(Dn);
  }
  return D.transpose() * D;
}

SplineBasis build_basis(const std::vector<double>& ages, const SplineOptions& opts) {
  if (ages.empty()) throw DataError("build_basis: no ages supplied");
  if (opts.n_interior_knots < 1) throw ConfigError("need at least one interior knot");
  for (double a : ages) {
    if (a < 0) throw DataError("build_basis: negative age");
  }
  std::set<double> distinct(ages.begin(), ages.end());
  if (static_cast<int>(distinct.size()) < opts.n_interior_knots + 2) {
    throw DataError("build_basis: fewer distinct ages (" + std::to_string(distinct.size()) +
                    ") than needed for " + std::to_string(opts.n_interior_knots) +
                    " interior knots");
  }
  double lo = *distinct.begin();
  double hi = *distinct.rbegin();
  std::vector<double> pooled(ages.begin(), ages.end());
  std::vector<double> knots;
  knots.reserve(static_cast<std::size_t>(opts.n_interior_knots));
  for (int k = 1; k <= opts.n_interior_knots; ++k) {
    double q = static_cast<double>(k) / (opts.n_interior_knots + 1);
    double v = quantile_linear(pooled, q);
    if (v <= lo || v >= hi) continue;
    if (!knots.empty() && v <= knots.back()) continue;  // ties collapse
    knots.push_back(v);
  }
  if (knots.empty()) {
    throw DataError("build_basis: age distribution too degenerate to place interior knots");
  }
  return SplineBasis(lo, hi, std::move(knots), opts.degree, opts.penalty_order);
}

}  // namespace dendrostate
