#include "dendrostate/blasso.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dendrostate/conjugate.hpp"
#include "dendrostate/csv.hpp"
#include "dendrostate/errors.hpp"
#include "dendrostate/rng.hpp"
#include "dendrostate/stats.hpp"

namespace dendrostate {

BlassoResult fit_blasso(const Eigen::VectorXd& response, const Eigen::MatrixXd& regressors,
                        const std::vector<std::string>& names, const BlassoConfig& config) {
  const Eigen::Index n = regressors.rows();
  const Eigen::Index p = regressors.cols();
  if (response.size() != n) throw DataError("fit_blasso: response/regressor row mismatch");
  if (static_cast<Eigen::Index>(names.size()) != p) {
    throw DataError("fit_blasso: variable name count mismatch");
  }
  if (n < 3) throw DataError("fit_blasso: too few rows");

  if (config.check_standardized) {
    for (Eigen::Index v = 0; v < p; ++v) {
      double m = regressors.col(v).mean();
      double sd = std::sqrt((regressors.col(v).array() - m).square().sum() /
                            static_cast<double>(n - 1));
      if (std::abs(m) > 0.25 || std::abs(sd - 1.0) > 0.35) {
        throw DataError("fit_blasso: column '" + names[static_cast<std::size_t>(v)] +
                        "' is not standardized (mean " + format_number(m) + ", sd " +
                        format_number(sd) + ")");
      }
    }
  }

  Eigen::VectorXd y = response.array() - response.mean();
  Eigen::MatrixXd XtX = regressors.transpose() * regressors;
  Eigen::VectorXd Xty = regressors.transpose() * y;

  Rng rng = Rng::stream(config.seed, "blasso");
  PosteriorChain chain(1, config.iterations, config.burn_in, config.thinning, config.seed);
  chain.add_block("beta", names);
  chain.add_block("lambda2", {"lambda2"});
  chain.add_block("sigma2", {"sigma2"});

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd inv_tau2 = Eigen::VectorXd::Ones(p);
  double sigma2 = std::max(sample_variance(std::span<const double>(
                               y.data(), static_cast<std::size_t>(n))),
                           1e-8);
  double lambda2 = 1.0;
  const double flat_ridge = 1e-8;

  for (int iter = 0; iter < config.iterations; ++iter) {
    // beta | rest
    Eigen::MatrixXd A = XtX;
    if (config.flat_prior) {
      A.diagonal().array() += flat_ridge;
    } else {
      A.diagonal() += inv_tau2;
    }
    Eigen::MatrixXd precision = A / sigma2;
    Eigen::VectorXd linear = Xty / sigma2;
    beta = sample_mvn_precision(precision, linear, rng);

    if (!config.flat_prior) {
      // 1/tau2_k | rest ~ inverse-Gaussian(sqrt(lambda2 sigma2 / beta_k^2), lambda2)
      for (Eigen::Index k = 0; k < p; ++k) {
        double b2 = std::max(beta[k] * beta[k], 1e-20);
        double mu = std::sqrt(lambda2 * sigma2 / b2);
        inv_tau2[k] = rng.inverse_gaussian(mu, lambda2);
      }
      // lambda2 | rest ~ Gamma(r + p, delta + sum tau2 / 2)
      double sum_tau2 = 0;
      for (Eigen::Index k = 0; k < p; ++k) sum_tau2 += 1.0 / inv_tau2[k];
      lambda2 = rng.gamma(config.lambda2_shape + static_cast<double>(p),
                          config.lambda2_rate + 0.5 * sum_tau2);
    }

    // sigma2 | rest
    double rss = (y - regressors * beta).squaredNorm();
    double quad = config.flat_prior ? 0.0 : beta.cwiseProduct(inv_tau2.cwiseProduct(beta)).sum();
    double shape = config.sigma2_shape + 0.5 * static_cast<double>(n) +
                   (config.flat_prior ? 0.0 : 0.5 * static_cast<double>(p));
    sigma2 = sample_inverse_gamma(shape, config.sigma2_rate + 0.5 * rss + 0.5 * quad, rng);

    if (!chain.keep(iter)) continue;
    chain.append(0, "beta", beta);
    chain.append(0, "lambda2", lambda2);
    chain.append(0, "sigma2", sigma2);
  }

  BlassoResult out;
  out.variables = names;
  out.median.resize(p);
  out.ci_low.resize(p);
  out.ci_high.resize(p);
  double tail = 0.5 * (1.0 - config.ci_level);
  for (Eigen::Index k = 0; k < p; ++k) {
    std::vector<double> draws = chain.pooled("beta", static_cast<int>(k));
    out.median[k] = median(draws);
    out.ci_low[k] = quantile_linear(draws, tail);
    out.ci_high[k] = quantile_linear(draws, 1.0 - tail);
    if (out.ci_low[k] > 0.0 || out.ci_high[k] < 0.0) {
      out.selected.push_back(static_cast<int>(k));
    }
  }
  out.chain = std::move(chain);
  return out;
}

LassoInput build_lasso_input(const std::vector<RingSeries>& rings,
                             const SeasonalClimate& climate_z, const StudyWindow& window,
                             const SplineOptions& spline) {
  if (rings.empty()) throw DataError("build_lasso_input: no ring series");

  // Pool ages for a common basis, then per-tree ridge fits with a unit
  // roughness weight: a fast preliminary detrending.
  std::vector<double> ages;
  for (const auto& tree : rings) {
    for (int year = std::max(tree.first_year, window.start_year);
         year <= std::min(tree.last_year(), window.end_year); ++year) {
      ages.push_back(static_cast<double>(tree.age_in_year(year)));
    }
  }
  if (ages.empty()) throw DataError("build_lasso_input: no observations in window");
  SplineBasis basis = build_basis(ages, spline);
  Eigen::MatrixXd K = basis.penalty();
  const int nb = basis.n_basis();

  struct CellAcc {
    double sum = 0;
    int n = 0;
  };
  std::map<std::pair<std::string, int>, CellAcc> cells;
  for (const auto& tree : rings) {
    int lo = std::max(tree.first_year, window.start_year);
    int hi = std::min(tree.last_year(), window.end_year);
    if (hi < lo) continue;
    int rows = hi - lo + 1;
    Eigen::MatrixXd B(rows, nb);
    Eigen::VectorXd logy(rows);
    for (int year = lo; year <= hi; ++year) {
      B.row(year - lo) = basis.evaluate(static_cast<double>(tree.age_in_year(year))).transpose();
      logy[year - lo] = std::log(tree.width(year));
    }
    Eigen::MatrixXd xtx = B.transpose() * B + K + 1e-4 * Eigen::MatrixXd::Identity(nb, nb);
    Eigen::VectorXd coef = xtx.llt().solve(B.transpose() * logy);
    Eigen::VectorXd resid = logy - B * coef;
    for (int year = lo; year <= hi; ++year) {
      auto& acc = cells[{tree.stand_id, year}];
      acc.sum += resid[year - lo];
      acc.n += 1;
    }
  }

  LassoInput input;
  input.names = climate_z.variables;
  std::vector<double> responses;
  std::vector<Eigen::Index> climate_rows;
  for (const auto& [key, acc] : cells) {
    int row = climate_z.row_index(key.first, key.second);
    if (row < 0) continue;
    bool complete = true;
    for (Eigen::Index v = 0; v < climate_z.values.cols(); ++v) {
      if (std::isnan(climate_z.values(row, v))) {
        complete = false;
        break;
      }
    }
    if (!complete) continue;
    responses.push_back(acc.sum / acc.n);
    climate_rows.push_back(row);
    input.cells.push_back({key.first, key.second});
  }
  if (responses.size() < 3) throw DataError("build_lasso_input: too few stand-year cells");
  input.response = Eigen::Map<Eigen::VectorXd>(responses.data(),
                                               static_cast<Eigen::Index>(responses.size()));
  input.regressors.resize(static_cast<Eigen::Index>(climate_rows.size()),
                          climate_z.values.cols());
  for (std::size_t r = 0; r < climate_rows.size(); ++r) {
    input.regressors.row(static_cast<Eigen::Index>(r)) = climate_z.values.row(climate_rows[r]);
  }
  return input;
}

void write_lasso_summary(const std::string& path, const BlassoResult& result) {
  CsvWriter w(path, {"variable", "median", "q5", "q95", "selected"});
  for (std::size_t v = 0; v < result.variables.size(); ++v) {
    bool selected = std::find(result.selected.begin(), result.selected.end(),
                              static_cast<int>(v)) != result.selected.end();
    w.row({result.variables[v], format_number(result.median[static_cast<Eigen::Index>(v)]),
           format_number(result.ci_low[static_cast<Eigen::Index>(v)]),
           format_number(result.ci_high[static_cast<Eigen::Index>(v)]),
           selected ? "1" : "0"});
  }
}

std::vector<std::string> read_selected_variables(const std::string& lasso_summary_path) {
  CsvTable t = CsvTable::read_file(lasso_summary_path);
  std::vector<std::string> out;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (t.integer(r, "selected") != 0) out.push_back(t.cell(r, "variable"));
  }
  return out;
}

}  // namespace dendrostate
