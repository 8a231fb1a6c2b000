#include "dendrostate/vce.hpp"

#include <cmath>
#include <future>
#include <memory>

#include "dendrostate/errors.hpp"
#include "dendrostate/stats.hpp"

namespace dendrostate {

VceSampler::VceSampler(const ModelDesign& design, VceConfig config)
    : core_(design, config.priors), config_(std::move(config)) {
  config_.mcmc.validate();
  const Eigen::Index p = design.climate.cols();
  if (config_.theta0_mean.size() == 0) config_.theta0_mean = Eigen::VectorXd::Zero(p);
  if (config_.theta0_cov.size() == 0) {
    config_.theta0_cov = config_.priors.coef_sd * config_.priors.coef_sd *
                         Eigen::MatrixXd::Identity(p, p);
  }
  if (config_.theta0_mean.size() != p || config_.theta0_cov.rows() != p) {
    throw ConfigError("vce: theta_0 prior dimension does not match selected variables");
  }
}

VceState VceSampler::initial_state() const {
  VceState state;
  static_cast<GrowthState&>(state) = core_.initial_state();
  const ModelDesign& d = core_.design();
  const Eigen::Index p = d.climate.cols();
  Eigen::MatrixXd precision = core_.climate_cross() + 1e-2 * Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd theta_hat = precision.llt().solve(d.climate.transpose() * state.alpha);
  state.theta_path = theta_hat.transpose().replicate(d.n_years, 1);
  state.sigma_theta = 0.01 * Eigen::MatrixXd::Identity(p, p);
  return state;
}

Eigen::VectorXd VceSampler::alpha_prior_mean(const VceState& state) const {
  const ModelDesign& d = core_.design();
  Eigen::VectorXd mean(d.n_cells());
  for (int c = 0; c < d.n_cells(); ++c) {
    int t = d.cells[static_cast<std::size_t>(c)].second;
    mean[c] = d.climate.row(c).dot(state.theta_path.row(t));
  }
  return mean;
}

void VceSampler::update_theta_path(VceState& state, Rng& rng, int* jitter_events) const {
  const ModelDesign& d = core_.design();
  StateObservations obs = window_observations(d, state.alpha, config_.plan);
  KalmanResult filt = kalman_filter(obs, state.sigma_theta, state.tau2, config_.theta0_mean,
                                    config_.theta0_cov);
  if (jitter_events) *jitter_events += filt.jitter_events;
  std::vector<Eigen::VectorXd> path = ffbs(filt, state.sigma_theta, rng);
  for (int t = 0; t < d.n_years; ++t) {
    state.theta_path.row(t) = path[static_cast<std::size_t>(t)].transpose();
  }
}

void VceSampler::update_sigma_theta(VceState& state, Rng& rng) const {
  const Eigen::Index p = state.theta_path.cols();
  const Eigen::Index T = state.theta_path.rows();
  if (T < 2) return;
  if (config_.sigma_theta_diagonal) {
    for (Eigen::Index v = 0; v < p; ++v) {
      double ss = 0;
      for (Eigen::Index t = 1; t < T; ++t) {
        double w = state.theta_path(t, v) - state.theta_path(t - 1, v);
        ss += w * w;
      }
      double draw = sample_inverse_gamma(
          config_.sigma_theta_prior_shape + 0.5 * static_cast<double>(T - 1),
          config_.sigma_theta_prior_rate + 0.5 * ss, rng);
      state.sigma_theta(v, v) = draw;
    }
  } else {
    Eigen::MatrixXd scatter = config_.iw_scale * Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index t = 1; t < T; ++t) {
      Eigen::VectorXd w = (state.theta_path.row(t) - state.theta_path.row(t - 1)).transpose();
      scatter += w * w.transpose();
    }
    double df = static_cast<double>(p) + config_.iw_extra_df + static_cast<double>(T - 1);
    state.sigma_theta = sample_inverse_wishart(df, scatter, rng);
  }
}

void VceSampler::gibbs_sweep(VceState& state, Rng& rng, std::uint64_t seed, long sweep,
                             int* jitter_events) const {
  core_.update_beta(state, seed, sweep, config_.mcmc.threads);
  core_.update_alpha(state, alpha_prior_mean(state), rng);
  update_theta_path(state, rng, jitter_events);
  update_sigma_theta(state, rng);
  core_.update_sigma2_pe(state, rng);
  core_.update_tau2(state, alpha_prior_mean(state), rng);
  core_.update_sigma2_beta(state, rng);
  core_.update_phi(state, rng);
  core_.check_divergence(state);
  double guard = config_.priors.divergence_guard;
  if (state.sigma_theta.diagonal().maxCoeff() > guard) {
    throw NumericError("vce: random-walk noise variance diverged");
  }
}

double VceSampler::log_joint(const VceState& state) const {
  double lp = core_.log_joint_shared(state, alpha_prior_mean(state));
  const Eigen::Index T = state.theta_path.rows();
  Eigen::MatrixXd sigma = state.sigma_theta;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success && T >= 2) {
    double logdet = 0;
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
      logdet += 2.0 * std::log(llt.matrixL()(i, i));
    }
    for (Eigen::Index t = 1; t < T; ++t) {
      Eigen::VectorXd w = (state.theta_path.row(t) - state.theta_path.row(t - 1)).transpose();
      lp += -0.5 * logdet - 0.5 * w.dot(llt.solve(w));
    }
  }
  // theta_1 against its prior.
  Eigen::VectorXd dev = state.theta_path.row(0).transpose() - config_.theta0_mean;
  Eigen::MatrixXd c1 = config_.theta0_cov + state.sigma_theta;
  lp += -0.5 * dev.dot(c1.llt().solve(dev));
  for (Eigen::Index v = 0; v < sigma.rows(); ++v) {
    lp += -(config_.sigma_theta_prior_shape + 1.0) * std::log(sigma(v, v)) -
          config_.sigma_theta_prior_rate / sigma(v, v);
  }
  return lp;
}

void VceSampler::run_chain(int chain_index, PosteriorChain& chain,
                           std::vector<Eigen::VectorXd>& fitted_sum, long& fitted_draws,
                           int& jitter_events) const {
  const ModelDesign& d = core_.design();
  std::uint64_t chain_seed =
      hash_label(config_.mcmc.seed, "vce-chain-" + std::to_string(chain_index));
  Rng rng(chain_seed);
  VceState state = initial_state();

  fitted_sum.resize(d.segments.size());
  for (std::size_t s = 0; s < d.segments.size(); ++s) {
    fitted_sum[s] = Eigen::VectorXd::Zero(d.segments[s].rows());
  }
  fitted_draws = 0;
  jitter_events = 0;

  std::unique_ptr<ChainStreamer> streamer;
  if (!config_.mcmc.stream_prefix.empty() && config_.mcmc.chains == 1) {
    streamer = std::make_unique<ChainStreamer>(config_.mcmc.stream_prefix, chain,
                                               config_.mcmc.stream_every);
  }
  Eigen::VectorXd theta_flat(static_cast<Eigen::Index>(d.n_years) * d.climate.cols());
  for (int iter = 0; iter < config_.mcmc.iterations; ++iter) {
    gibbs_sweep(state, rng, chain_seed, iter, &jitter_events);
    if (streamer) streamer->flush();
    if (!chain.keep(iter)) continue;
    for (int t = 0; t < d.n_years; ++t) {
      theta_flat.segment(static_cast<Eigen::Index>(t) * d.climate.cols(), d.climate.cols()) =
          state.theta_path.row(t).transpose();
    }
    chain.append(chain_index, "theta_path", theta_flat);
    chain.append(chain_index, "sigma_theta_diag", state.sigma_theta.diagonal());
    chain.append(chain_index, "sigma2_pe", state.sigma2_pe);
    chain.append(chain_index, "phi", state.phi);
    chain.append(chain_index, "tau2", state.tau2);
    chain.append(chain_index, "sigma2_beta", state.sigma2_beta);
    chain.append(chain_index, "lp", log_joint(state));
    if (config_.mcmc.store_alpha) chain.append(chain_index, "alpha", state.alpha);
    for (std::size_t s = 0; s < d.segments.size(); ++s) fitted_sum[s] += state.fitted[s];
    ++fitted_draws;
  }
  if (streamer) streamer->flush(/*force=*/true);
}

VceFit VceSampler::fit() const {
  const ModelDesign& d = core_.design();
  const McmcOptions& mcmc = config_.mcmc;
  PosteriorChain chain(mcmc.chains, mcmc.iterations, mcmc.burn_in, mcmc.thinning, mcmc.seed);

  std::vector<std::string> theta_labels;
  for (int t = 0; t < d.n_years; ++t) {
    for (const auto& v : d.climate_vars) {
      theta_labels.push_back(std::to_string(d.window.start_year + t) + ":" + v);
    }
  }
  chain.add_block("theta_path", theta_labels);
  chain.add_block("sigma_theta_diag", d.climate_vars);
  chain.add_block("sigma2_pe", {"sigma2_pe"});
  chain.add_block("phi", {"phi"});
  chain.add_block("tau2", {"tau2"});
  chain.add_block("sigma2_beta", {"sigma2_beta"});
  chain.add_block("lp", {"lp"});
  if (mcmc.store_alpha) {
    std::vector<std::string> labels;
    for (const auto& [j, t] : d.cells) {
      labels.push_back(d.stand_ids[static_cast<std::size_t>(j)] + ":" +
                       std::to_string(d.window.start_year + t));
    }
    chain.add_block("alpha", labels);
  }

  std::vector<std::vector<Eigen::VectorXd>> sums(static_cast<std::size_t>(mcmc.chains));
  std::vector<long> counts(static_cast<std::size_t>(mcmc.chains), 0);
  std::vector<int> jitters(static_cast<std::size_t>(mcmc.chains), 0);
  if (mcmc.chains > 1 && mcmc.threads > 1) {
    std::vector<std::future<void>> futures;
    for (int c = 0; c < mcmc.chains; ++c) {
      futures.push_back(std::async(std::launch::async, [this, c, &chain, &sums, &counts, &jitters] {
        run_chain(c, chain, sums[static_cast<std::size_t>(c)],
                  counts[static_cast<std::size_t>(c)], jitters[static_cast<std::size_t>(c)]);
      }));
    }
    for (auto& f : futures) f.get();
  } else {
    for (int c = 0; c < mcmc.chains; ++c) {
      run_chain(c, chain, sums[static_cast<std::size_t>(c)], counts[static_cast<std::size_t>(c)],
                jitters[static_cast<std::size_t>(c)]);
    }
  }

  VceFit fit;
  fit.fitted_trend_mean.resize(d.segments.size());
  long total = 0;
  for (long c : counts) total += c;
  for (std::size_t s = 0; s < d.segments.size(); ++s) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d.segments[s].rows());
    for (const auto& chain_sums : sums) sum += chain_sums[s];
    fit.fitted_trend_mean[s] = sum / static_cast<double>(std::max<long>(total, 1));
  }
  for (int j : jitters) fit.filter_jitter_events += j;
  fit.chain = std::move(chain);
  return fit;
}

VceFit fit_vce(const ModelDesign& design, const VceConfig& config) {
  return VceSampler(design, config).fit();
}

std::vector<TrajectoryRow> summarize_trajectory(const PosteriorChain& chain,
                                                const ModelDesign& design, int r2_half_width,
                                                double ci_level) {
  double tail = 0.5 * (1.0 - ci_level);
  const int T = design.n_years;
  const int p = static_cast<int>(design.climate_vars.size());
  Eigen::VectorXd theta_mean_flat = chain.posterior_mean("theta_path");
  Eigen::MatrixXd theta_mean(T, p);
  for (int t = 0; t < T; ++t) {
    theta_mean.row(t) =
        theta_mean_flat.segment(static_cast<Eigen::Index>(t) * p, p).transpose();
  }
  Eigen::VectorXd alpha_mean = chain.posterior_mean("alpha");

  std::vector<TrajectoryRow> rows;
  rows.reserve(static_cast<std::size_t>(T) * static_cast<std::size_t>(p));
  for (int t = 0; t < T; ++t) {
    double r2 = annual_r2(design, alpha_mean, theta_mean, t, r2_half_width);
    for (int v = 0; v < p; ++v) {
      TrajectoryRow row;
      row.year = design.window.start_year + t;
      row.variable = design.climate_vars[static_cast<std::size_t>(v)];
      std::vector<double> draws = chain.pooled("theta_path", t * p + v);
      row.post_mean = mean(draws);
      row.ci_low = quantile_linear(draws, tail);
      row.ci_high = quantile_linear(draws, 1.0 - tail);
      row.r2_annual = r2;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace dendrostate
