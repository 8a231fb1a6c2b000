#pragma once

#include <vector>

#include <Eigen/Dense>

namespace dendrostate {

// Clamped B-spline basis over an age range with a difference penalty on
// the coefficients (P-spline construction). Interior knots sit at
// empirical age quantiles; the basis is shared by every tree, only the
// coefficients differ.
class SplineBasis {
 public:
  SplineBasis() = default;
  SplineBasis(double age_lo, double age_hi, std::vector<double> interior_knots,
              int degree, int penalty_order);

  int n_basis() const { return static_cast<int>(interior_knots_.size()) + degree_ + 1; }
  int degree() const { return degree_; }
  int penalty_order() const { return penalty_order_; }
  double age_lo() const { return lo_; }
  double age_hi() const { return hi_; }
  const std::vector<double>& interior_knots() const { return interior_knots_; }

  // Basis row at an age; ages are clamped into [lo, hi]. Rows sum to 1.
  Eigen::VectorXd evaluate(double age) const;
  Eigen::MatrixXd evaluate_all(const std::vector<double>& ages) const;

  // K = D'D for the difference matrix D of the configured order.
  Eigen::MatrixXd penalty() const;
  int penalty_rank() const { return n_basis() - penalty_order_; }

 private:
  double lo_ = 0, hi_ = 1;
  std::vector<double> interior_knots_;
  int degree_ = 3;
  int penalty_order_ = 2;
  std::vector<double> knots_;  // padded
};

struct SplineOptions {
  int n_interior_knots = 10;
  int degree = 3;
  int penalty_order = 2;
};

// Knots at quantiles of the pooled ages. Throws DataError when there are
// fewer distinct ages than requested knots.
SplineBasis build_basis(const std::vector<double>& ages, const SplineOptions& opts = {});

}  // namespace dendrostate
