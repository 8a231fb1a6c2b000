#include "dendrostate/growth_model.hpp"

#include <cmath>
#include <thread>

#include "dendrostate/errors.hpp"
#include "dendrostate/stats.hpp"

namespace dendrostate {

void McmcOptions::validate() const {
  if (iterations <= burn_in || burn_in < 0) throw ConfigError("iterations must exceed burn-in >= 0");
  if (thinning < 1) throw ConfigError("thinning must be >= 1");
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

GrowthModel::GrowthModel(const ModelDesign& design, GrowthPriors priors)
    : design_(&design), priors_(priors) {
  penalty_ = design.basis.penalty();
  penalty_rank_ = design.basis.penalty_rank();
  FtF_ = design.climate.transpose() * design.climate;
  stand_segments_.resize(static_cast<std::size_t>(design.n_stands()));
  for (std::size_t s = 0; s < design.segments.size(); ++s) {
    stand_segments_[static_cast<std::size_t>(design.segments[s].stand)].push_back(
        static_cast<int>(s));
  }
}

void GrowthModel::refresh_fitted(GrowthState& state, int tree) const {
  auto [begin, end] = design_->tree_segments[static_cast<std::size_t>(tree)];
  for (int s = begin; s < end; ++s) {
    const auto& seg = design_->segments[static_cast<std::size_t>(s)];
    state.fitted[static_cast<std::size_t>(s)] = seg.B * state.beta.row(tree).transpose();
  }
}

GrowthState GrowthModel::initial_state() const {
  const ModelDesign& d = *design_;
  GrowthState state;
  const int nb = d.basis.n_basis();
  state.beta.resize(d.n_trees(), nb);
  state.fitted.resize(d.segments.size());

  // Ridge fit per tree with a unit roughness penalty: a cheap starting
  // trend that keeps the chain out of degenerate territory.
  Eigen::MatrixXd ridge = penalty_ + 1e-4 * Eigen::MatrixXd::Identity(nb, nb);
  for (int i = 0; i < d.n_trees(); ++i) {
    Eigen::MatrixXd xtx = ridge;
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(nb);
    auto [begin, end] = d.tree_segments[static_cast<std::size_t>(i)];
    for (int s = begin; s < end; ++s) {
      const auto& seg = d.segments[static_cast<std::size_t>(s)];
      xtx += seg.B.transpose() * seg.B;
      xty += seg.B.transpose() * seg.log_y;
    }
    state.beta.row(i) = xtx.llt().solve(xty).transpose();
    refresh_fitted(state, i);
  }

  // Stand effects: mean residual per observed cell.
  state.alpha = Eigen::VectorXd::Zero(d.n_cells());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(d.n_cells());
  for (std::size_t s = 0; s < d.segments.size(); ++s) {
    const auto& seg = d.segments[s];
    for (int r = 0; r < seg.rows(); ++r) {
      int cell = d.cell_index(seg.stand, seg.first_t + r);
      state.alpha[cell] += seg.log_y[r] - state.fitted[s][r];
      counts[cell] += 1.0;
    }
  }
  for (int c = 0; c < d.n_cells(); ++c) {
    if (counts[c] > 0) state.alpha[c] /= counts[c];
  }

  // Residual variance from the initialization.
  double ss = 0;
  long n = 0;
  for (std::size_t s = 0; s < d.segments.size(); ++s) {
    const auto& seg = d.segments[s];
    for (int r = 0; r < seg.rows(); ++r) {
      int cell = d.cell_index(seg.stand, seg.first_t + r);
      double e = seg.log_y[r] - state.fitted[s][r] - state.alpha[cell];
      ss += e * e;
      ++n;
    }
  }
  state.sigma2_pe = n > 1 ? std::max(ss / static_cast<double>(n), 1e-4) : 1.0;
  state.phi = 0.0;
  double a_var = sample_variance(std::span<const double>(state.alpha.data(),
                                                         static_cast<std::size_t>(state.alpha.size())));
  state.tau2 = std::max(a_var, 1e-4);
  state.sigma2_beta = 1.0;
  if (priors_.fix_sigma2_pe) state.sigma2_pe = *priors_.fix_sigma2_pe;
  if (priors_.fix_tau2) state.tau2 = *priors_.fix_tau2;
  if (priors_.fix_sigma2_beta) state.sigma2_beta = *priors_.fix_sigma2_beta;
  if (priors_.fix_phi) state.phi = *priors_.fix_phi;
  return state;
}

void GrowthModel::update_beta_range(GrowthState& state, std::uint64_t seed, long sweep,
                                    int begin, int end) const {
  const ModelDesign& d = *design_;
  const int nb = d.basis.n_basis();
  const double coef_prec = 1.0 / (priors_.coef_sd * priors_.coef_sd);
  for (int i = begin; i < end; ++i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(sweep) * 0x10001ULL +
                                    static_cast<std::uint64_t>(i));
    Eigen::MatrixXd precision = penalty_ / state.sigma2_beta +
                                coef_prec * Eigen::MatrixXd::Identity(nb, nb);
    Eigen::VectorXd linear = Eigen::VectorXd::Zero(nb);
    auto [s_begin, s_end] = d.tree_segments[static_cast<std::size_t>(i)];
    for (int s = s_begin; s < s_end; ++s) {
      const auto& seg = d.segments[static_cast<std::size_t>(s)];
      Eigen::MatrixXd Bw = seg.B;
      Eigen::VectorXd rw(seg.rows());
      for (int r = 0; r < seg.rows(); ++r) {
        int cell = d.cell_index(seg.stand, seg.first_t + r);
        rw[r] = seg.log_y[r] - state.alpha[cell];
      }
      ar1_whiten_rows(Bw, state.phi);
      ar1_whiten(rw, state.phi);
      precision.noalias() += Bw.transpose() * Bw / state.sigma2_pe;
      linear.noalias() += Bw.transpose() * rw / state.sigma2_pe;
    }
    state.beta.row(i) = sample_mvn_precision(precision, linear, rng).transpose();
    refresh_fitted(state, i);
  }
}

void GrowthModel::update_beta(GrowthState& state, std::uint64_t seed, long sweep,
                              int threads) const {
  const int n = design_->n_trees();
  if (threads <= 1 || n < 16) {
    update_beta_range(state, seed, sweep, 0, n);
    return;
  }
  int used = std::min(threads, 8);
  std::vector<std::thread> pool;
  int chunk = (n + used - 1) / used;
  for (int w = 0; w < used; ++w) {
    int begin = w * chunk;
    int end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([this, &state, seed, sweep, begin, end] {
      update_beta_range(state, seed, sweep, begin, end);
    });
  }
  for (auto& t : pool) t.join();
}

void GrowthModel::update_alpha(GrowthState& state, const Eigen::VectorXd& prior_mean,
                               Rng& rng) const {
  const ModelDesign& d = *design_;
  const double phi = state.phi;
  const double inv_s2 = 1.0 / state.sigma2_pe;
  const double inv_t2 = 1.0 / state.tau2;
  const double one_minus_phi2 = 1.0 - phi * phi;

  for (int j = 0; j < d.n_stands(); ++j) {
    const auto& years = d.stand_years[static_cast<std::size_t>(j)];
    if (years.empty()) continue;
    const int nj = static_cast<int>(years.size());
    // Local position of each year within this stand's cell list.
    // Years may be non-contiguous; whitening couples only adjacent years
    // within a tree segment, which always lives inside one contiguous run.
    std::vector<int> pos_of_t(static_cast<std::size_t>(d.n_years), -1);
    for (int q = 0; q < nj; ++q) pos_of_t[static_cast<std::size_t>(years[q])] = q;

    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nj, nj);
    Eigen::VectorXd lin = Eigen::VectorXd::Zero(nj);
    for (int s : stand_segments_[static_cast<std::size_t>(j)]) {
      const auto& seg = d.segments[static_cast<std::size_t>(s)];
      const Eigen::VectorXd& fit = state.fitted[static_cast<std::size_t>(s)];
      // d_r = observed - trend; the model for d is alpha + AR1 noise.
      int p0 = pos_of_t[static_cast<std::size_t>(seg.first_t)];
      double d0 = seg.log_y[0] - fit[0];
      M(p0, p0) += one_minus_phi2 * inv_s2;
      lin[p0] += one_minus_phi2 * d0 * inv_s2;
      for (int r = 1; r < seg.rows(); ++r) {
        int pr = pos_of_t[static_cast<std::size_t>(seg.first_t + r)];
        int pm = pos_of_t[static_cast<std::size_t>(seg.first_t + r - 1)];
        double dr = seg.log_y[r] - fit[r];
        double dm = seg.log_y[r - 1] - fit[r - 1];
        double z = dr - phi * dm;
        M(pr, pr) += inv_s2;
        M(pm, pm) += phi * phi * inv_s2;
        M(pr, pm) -= phi * inv_s2;
        M(pm, pr) -= phi * inv_s2;
        lin[pr] += z * inv_s2;
        lin[pm] -= phi * z * inv_s2;
      }
    }
    for (int q = 0; q < nj; ++q) {
      int cell = d.cell_index(j, years[static_cast<std::size_t>(q)]);
      M(q, q) += inv_t2;
      lin[q] += prior_mean[cell] * inv_t2;
    }
    Eigen::VectorXd draw = sample_mvn_precision(M, lin, rng);
    for (int q = 0; q < nj; ++q) {
      state.alpha[d.cell_index(j, years[static_cast<std::size_t>(q)])] = draw[q];
    }
  }
}

Ar1SuffStats GrowthModel::residual_stats(const GrowthState& state) const {
  const ModelDesign& d = *design_;
  Ar1SuffStats stats;
  std::vector<double> run;
  for (std::size_t s = 0; s < d.segments.size(); ++s) {
    const auto& seg = d.segments[s];
    const Eigen::VectorXd& fit = state.fitted[s];
    run.clear();
    run.reserve(static_cast<std::size_t>(seg.rows()));
    for (int r = 0; r < seg.rows(); ++r) {
      int cell = d.cell_index(seg.stand, seg.first_t + r);
      run.push_back(seg.log_y[r] - fit[r] - state.alpha[cell]);
    }
    stats.add_run(run);
  }
  return stats;
}

void GrowthModel::update_sigma2_pe(GrowthState& state, Rng& rng) const {
  if (priors_.fix_sigma2_pe) {
    state.sigma2_pe = *priors_.fix_sigma2_pe;
    return;
  }
  Ar1SuffStats stats = residual_stats(state);
  double ssw = ar1_whitened_ss(stats, state.phi);
  state.sigma2_pe = sample_inverse_gamma(
      priors_.variance_shape + 0.5 * static_cast<double>(stats.n_obs),
      priors_.variance_rate + 0.5 * ssw, rng);
}

void GrowthModel::update_tau2(GrowthState& state, const Eigen::VectorXd& prior_mean,
                              Rng& rng) const {
  if (priors_.fix_tau2) {
    state.tau2 = *priors_.fix_tau2;
    return;
  }
  double ss = (state.alpha - prior_mean).squaredNorm();
  state.tau2 = sample_inverse_gamma(
      priors_.variance_shape + 0.5 * static_cast<double>(state.alpha.size()),
      priors_.variance_rate + 0.5 * ss, rng);
}

void GrowthModel::update_sigma2_beta(GrowthState& state, Rng& rng) const {
  if (priors_.fix_sigma2_beta) {
    state.sigma2_beta = *priors_.fix_sigma2_beta;
    return;
  }
  double quad = 0;
  for (int i = 0; i < state.beta.rows(); ++i) {
    quad += state.beta.row(i) * penalty_ * state.beta.row(i).transpose();
  }
  state.sigma2_beta = sample_inverse_gamma(
      priors_.variance_shape +
          0.5 * static_cast<double>(penalty_rank_) * static_cast<double>(state.beta.rows()),
      priors_.variance_rate + 0.5 * quad, rng);
}

void GrowthModel::update_phi(GrowthState& state, Rng& rng) const {
  if (priors_.fix_phi) {
    state.phi = *priors_.fix_phi;
    return;
  }
  Ar1SuffStats stats = residual_stats(state);
  state.phi = sample_phi_ar1(stats, state.sigma2_pe, state.phi, rng,
                             priors_.phi_proposal_sd, priors_.phi_steps);
}

double GrowthModel::log_joint_shared(const GrowthState& state,
                                     const Eigen::VectorXd& prior_mean) const {
  Ar1SuffStats stats = residual_stats(state);
  double lp = ar1_log_likelihood(stats, state.phi, state.sigma2_pe);
  double n_cells = static_cast<double>(state.alpha.size());
  lp += -0.5 * n_cells * std::log(state.tau2) -
        (state.alpha - prior_mean).squaredNorm() / (2.0 * state.tau2);
  double quad = 0;
  for (int i = 0; i < state.beta.rows(); ++i) {
    quad += state.beta.row(i) * penalty_ * state.beta.row(i).transpose();
  }
  lp += -0.5 * static_cast<double>(penalty_rank_) * static_cast<double>(state.beta.rows()) *
            std::log(state.sigma2_beta) -
        quad / (2.0 * state.sigma2_beta);
  lp += -state.beta.squaredNorm() / (2.0 * priors_.coef_sd * priors_.coef_sd);
  auto ig = [&](double v) {
    return -(priors_.variance_shape + 1.0) * std::log(v) - priors_.variance_rate / v;
  };
  lp += ig(state.sigma2_pe) + ig(state.tau2) + ig(state.sigma2_beta);
  return lp;
}

void GrowthModel::check_divergence(const GrowthState& state) const {
  double g = priors_.divergence_guard;
  if (state.sigma2_pe > g || state.tau2 > g || state.sigma2_beta > g) {
    throw NumericError("sampler diverged: variance exceeded " + std::to_string(g) +
                       " (sigma2_pe=" + std::to_string(state.sigma2_pe) +
                       ", tau2=" + std::to_string(state.tau2) +
                       ", sigma2_beta=" + std::to_string(state.sigma2_beta) + ")");
  }
}

}  // namespace dendrostate
