#include "dendrostate/synth.hpp"

#include <cmath>

#include "dendrostate/csv.hpp"
#include "dendrostate/errors.hpp"
#include "dendrostate/rng.hpp"
#include "dendrostate/stats.hpp"

namespace dendrostate {

void SynthConfig::validate() const {
  if (n_trees < 1 || n_stands < 1 || n_years < 1 || p < 1) {
    throw ConfigError("simulate: counts must be >= 1");
  }
  if (n_trees < n_stands) throw ConfigError("simulate: need at least one tree per stand");
  if (!(std::abs(phi) < 1.0)) throw ConfigError("simulate: |phi| must be < 1");
  if (!(sigma2_pe >= 0 && tau2 >= 0)) throw ConfigError("simulate: variances must be >= 0");
}

Eigen::VectorXd SynthConfig::default_theta() const {
  Eigen::VectorXd t(p);
  if (p == 5) {
    t << -0.3, -0.2, -0.25, -0.25, 0.15;
  } else {
    for (int i = 0; i < p; ++i) t[i] = (i % 2 == 0 ? -0.25 : 0.15);
  }
  return t;
}

std::vector<std::string> SynthConfig::default_names() const {
  if (p == 5) return {"FAL-DEF", "SPR-DEF", "SUM-DEF", "SUM-DEF-LAG", "SNOW"};
  std::vector<std::string> names;
  for (int i = 0; i < p; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "V%02d", i + 1);
    names.emplace_back(buf);
  }
  return names;
}

namespace {

double trend_value(SynthConfig::Trend kind, double age) {
  switch (kind) {
    case SynthConfig::Trend::flat:
      return 0.0;
    case SynthConfig::Trend::concave:
    default:
      // Rapid early growth, slow decline with size: a typical ring-width
      // trajectory on the log scale.
      return 0.9 * std::log1p(age) - 0.012 * age;
  }
}

}  // namespace

SynthData simulate(const SynthConfig& config) {
  config.validate();
  const int k = config.n_stands;
  const int n = config.n_trees;
  const int T = config.n_years;
  const int p = config.p;

  Eigen::VectorXd theta0 = config.theta.size() == p ? config.theta : config.default_theta();
  std::vector<std::string> names =
      config.var_names.size() == static_cast<std::size_t>(p) ? config.var_names
                                                             : config.default_names();

  Rng rng = Rng::stream(config.seed, "synth");

  // Climate covariates: iid standard normal stand-year rows.
  Eigen::MatrixXd F(static_cast<Eigen::Index>(k) * T, p);
  for (Eigen::Index r = 0; r < F.rows(); ++r) {
    for (int v = 0; v < p; ++v) F(r, v) = rng.normal();
  }

  // Coefficient path.
  Eigen::MatrixXd theta_path(T, p);
  int step_at = config.step_year_index >= 0 ? config.step_year_index : T / 2;
  for (int t = 0; t < T; ++t) {
    Eigen::VectorXd th = theta0;
    switch (config.path) {
      case SynthConfig::Path::constant:
        break;
      case SynthConfig::Path::step:
        if (t >= step_at) th[config.step_component] = config.step_to;
        break;
      case SynthConfig::Path::ramp: {
        Eigen::VectorXd target = config.ramp_to.size() == p ? config.ramp_to : theta0;
        double w = T > 1 ? static_cast<double>(t) / (T - 1) : 0.0;
        th = (1.0 - w) * theta0 + w * target;
        break;
      }
    }
    theta_path.row(t) = th.transpose();
  }
  if (config.sigma_theta_diag.size() == p) {
    Eigen::VectorXd walk = theta_path.row(0).transpose();
    for (int t = 1; t < T; ++t) {
      for (int v = 0; v < p; ++v) {
        walk[v] += std::sqrt(config.sigma_theta_diag[v]) * rng.normal();
      }
      theta_path.row(t) += (walk - theta_path.row(0).transpose()).transpose();
    }
  }

  // Stand effects.
  std::vector<double> stand_noise;
  Eigen::MatrixXd alpha(k, T);
  for (int j = 0; j < k; ++j) {
    for (int t = 0; t < T; ++t) {
      double v = std::sqrt(config.tau2) * rng.normal();
      stand_noise.push_back(v);
      alpha(j, t) = F.row(static_cast<Eigen::Index>(j) * T + t).dot(theta_path.row(t)) + v;
    }
  }

  // Trees: recruitment, trend, AR1 residuals, widths.
  SynthData out;
  out.rings.reserve(static_cast<std::size_t>(n));
  std::vector<double> innovations;
  std::vector<double> residuals;
  double sd_pe = std::sqrt(config.sigma2_pe);
  double stationary_sd = sd_pe / std::sqrt(1.0 - config.phi * config.phi);

  for (int i = 0; i < n; ++i) {
    int j = i % k;
    int recruit_t = 0;
    if (config.staggered_recruitment && i >= k) {
      int latest = std::max(0, T - config.min_record_years);
      recruit_t = static_cast<int>(rng.integer(static_cast<std::uint64_t>(latest + 1)));
    }
    double intercept = 0.3 * rng.normal();

    RingSeries tree;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "T%04d", i + 1);
    tree.tree_id = buf;
    std::snprintf(buf, sizeof(buf), "S%03d", j + 1);
    tree.stand_id = buf;
    tree.plot_id = tree.stand_id + "-P1";
    // Rotate through study species so host and non-host taxa both appear.
    static const char* species[6] = {"ABBA", "POTR", "PIBA", "ACSA", "PIMA", "BEPA"};
    tree.species_code = species[i % 6];
    tree.recruitment_year = config.start_year + recruit_t;
    tree.first_year = tree.recruitment_year;

    double eps = stationary_sd * rng.normal();
    bool first = true;
    for (int t = recruit_t; t < T; ++t) {
      if (!first) {
        double innov = sd_pe * rng.normal();
        innovations.push_back(innov);
        eps = config.phi * eps + innov;
      }
      first = false;
      residuals.push_back(eps);
      double age = static_cast<double>(t - recruit_t);
      double logw = intercept + trend_value(config.trend, age) + alpha(j, t) + eps;
      tree.widths_mm.push_back(std::exp(logw));
    }
    out.rings.push_back(std::move(tree));
  }

  // Climate table: already on the standardized scale.
  out.climate.variables = names;
  out.climate.standardized = true;
  out.climate.mean = Eigen::VectorXd::Zero(p);
  out.climate.sd = Eigen::VectorXd::Ones(p);
  out.climate.values.resize(static_cast<Eigen::Index>(k) * T, p);
  for (int j = 0; j < k; ++j) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "S%03d", j + 1);
    for (int t = 0; t < T; ++t) {
      out.climate.rows.push_back({buf, config.start_year + t});
      out.climate.values.row(static_cast<Eigen::Index>(out.climate.rows.size()) - 1) =
          F.row(static_cast<Eigen::Index>(j) * T + t);
    }
  }

  out.truth.theta_path = theta_path;
  out.truth.sigma2_pe = config.sigma2_pe;
  out.truth.phi = config.phi;
  out.truth.tau2 = config.tau2;
  out.truth.tree_innovation_var = sample_variance(innovations);
  out.truth.stand_noise_var = sample_variance(stand_noise);
  out.truth.stationary_residual_var = sample_variance(residuals);
  return out;
}

void write_truth_csv(const std::string& path, const SynthConfig& config,
                     const SynthTruth& truth) {
  CsvWriter w(path, {"parameter", "year", "variable", "value"});
  std::vector<std::string> names =
      config.var_names.size() == static_cast<std::size_t>(config.p) ? config.var_names
                                                                    : config.default_names();
  for (int t = 0; t < truth.theta_path.rows(); ++t) {
    for (int v = 0; v < truth.theta_path.cols(); ++v) {
      w.row({"theta", format_number(static_cast<long long>(config.start_year + t)),
             names[static_cast<std::size_t>(v)], format_number(truth.theta_path(t, v))});
    }
  }
  auto scalar = [&](const std::string& name, double value) {
    w.row({name, "", "", format_number(value)});
  };
  scalar("sigma2_pe", truth.sigma2_pe);
  scalar("phi", truth.phi);
  scalar("tau2", truth.tau2);
  scalar("tree_innovation_var", truth.tree_innovation_var);
  scalar("stand_noise_var", truth.stand_noise_var);
  scalar("stationary_residual_var", truth.stationary_residual_var);
}

}  // namespace dendrostate
