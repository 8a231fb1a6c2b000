#include "dendrostate/fce.hpp"

#include <cmath>
#include <future>
#include <memory>

#include "dendrostate/csv.hpp"
#include "dendrostate/errors.hpp"
#include "dendrostate/stats.hpp"

namespace dendrostate {

FceSampler::FceSampler(const ModelDesign& design, FceConfig config)
    : core_(design, config.priors), config_(std::move(config)) {
  config_.mcmc.validate();
}

FceState FceSampler::initial_state() const {
  FceState state;
  static_cast<GrowthState&>(state) = core_.initial_state();
  const ModelDesign& d = core_.design();
  const Eigen::Index p = d.climate.cols();
  // Ridge start for theta from the initialized stand effects.
  Eigen::MatrixXd precision =
      core_.climate_cross() + 1e-2 * Eigen::MatrixXd::Identity(p, p);
  state.theta = precision.llt().solve(d.climate.transpose() * state.alpha);
  return state;
}

Eigen::VectorXd FceSampler::alpha_prior_mean(const FceState& state) const {
  return core_.design().climate * state.theta;
}

void FceSampler::update_theta(FceState& state, Rng& rng) const {
  const GrowthPriors& priors = config_.priors;
  const Eigen::Index p = state.theta.size();
  Eigen::MatrixXd precision =
      core_.climate_cross() / state.tau2 +
      Eigen::MatrixXd::Identity(p, p) / (priors.coef_sd * priors.coef_sd);
  Eigen::VectorXd linear = core_.design().climate.transpose() * state.alpha / state.tau2;
  state.theta = sample_mvn_precision(precision, linear, rng);
}

void FceSampler::gibbs_sweep(FceState& state, Rng& rng, std::uint64_t seed, long sweep) const {
  core_.update_beta(state, seed, sweep, config_.mcmc.threads);
  core_.update_alpha(state, alpha_prior_mean(state), rng);
  update_theta(state, rng);
  core_.update_sigma2_pe(state, rng);
  core_.update_tau2(state, alpha_prior_mean(state), rng);
  core_.update_sigma2_beta(state, rng);
  core_.update_phi(state, rng);
  core_.check_divergence(state);
}

double FceSampler::log_joint(const FceState& state) const {
  double lp = core_.log_joint_shared(state, alpha_prior_mean(state));
  lp += -state.theta.squaredNorm() / (2.0 * config_.priors.coef_sd * config_.priors.coef_sd);
  return lp;
}

void FceSampler::run_chain(int chain_index, PosteriorChain& chain,
                           std::vector<Eigen::VectorXd>& fitted_sum, long& fitted_draws) const {
  const ModelDesign& d = core_.design();
  std::uint64_t chain_seed =
      hash_label(config_.mcmc.seed, "fce-chain-" + std::to_string(chain_index));
  Rng rng(chain_seed);
  FceState state = initial_state();

  fitted_sum.resize(d.segments.size());
  for (std::size_t s = 0; s < d.segments.size(); ++s) {
    fitted_sum[s] = Eigen::VectorXd::Zero(d.segments[s].rows());
  }
  fitted_draws = 0;

  std::unique_ptr<ChainStreamer> streamer;
  if (!config_.mcmc.stream_prefix.empty() && config_.mcmc.chains == 1) {
    streamer = std::make_unique<ChainStreamer>(config_.mcmc.stream_prefix, chain,
                                               config_.mcmc.stream_every);
  }
  for (int iter = 0; iter < config_.mcmc.iterations; ++iter) {
    gibbs_sweep(state, rng, chain_seed, iter);
    if (streamer) streamer->flush();
    if (!chain.keep(iter)) continue;
    chain.append(chain_index, "theta", state.theta);
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

FceFit FceSampler::fit() const {
  const ModelDesign& d = core_.design();
  const McmcOptions& mcmc = config_.mcmc;
  PosteriorChain chain(mcmc.chains, mcmc.iterations, mcmc.burn_in, mcmc.thinning, mcmc.seed);
  chain.add_block("theta", d.climate_vars);
  chain.add_block("sigma2_pe", {"sigma2_pe"});
  chain.add_block("phi", {"phi"});
  chain.add_block("tau2", {"tau2"});
  chain.add_block("sigma2_beta", {"sigma2_beta"});
  chain.add_block("lp", {"lp"});
  if (mcmc.store_alpha) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(d.n_cells()));
    for (const auto& [j, t] : d.cells) {
      labels.push_back(d.stand_ids[static_cast<std::size_t>(j)] + ":" +
                       std::to_string(d.window.start_year + t));
    }
    chain.add_block("alpha", labels);
  }

  std::vector<std::vector<Eigen::VectorXd>> sums(static_cast<std::size_t>(mcmc.chains));
  std::vector<long> counts(static_cast<std::size_t>(mcmc.chains), 0);
  if (mcmc.chains > 1 && mcmc.threads > 1) {
    std::vector<std::future<void>> futures;
    for (int c = 0; c < mcmc.chains; ++c) {
      futures.push_back(std::async(std::launch::async, [this, c, &chain, &sums, &counts] {
        run_chain(c, chain, sums[static_cast<std::size_t>(c)],
                  counts[static_cast<std::size_t>(c)]);
      }));
    }
    for (auto& f : futures) f.get();
  } else {
    for (int c = 0; c < mcmc.chains; ++c) {
      run_chain(c, chain, sums[static_cast<std::size_t>(c)], counts[static_cast<std::size_t>(c)]);
    }
  }

  FceFit fit;
  fit.fitted_trend_mean.resize(d.segments.size());
  long total = 0;
  for (long c : counts) total += c;
  for (std::size_t s = 0; s < d.segments.size(); ++s) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d.segments[s].rows());
    for (const auto& chain_sums : sums) sum += chain_sums[s];
    fit.fitted_trend_mean[s] = sum / static_cast<double>(std::max<long>(total, 1));
  }
  fit.chain = std::move(chain);
  return fit;
}

FceFit fit_fce(const ModelDesign& design, const FceConfig& config) {
  return FceSampler(design, config).fit();
}

void write_theta_summary(const std::string& path, const PosteriorChain& chain,
                         const std::vector<std::string>& variables) {
  CsvWriter w(path, {"variable", "median", "q2.5", "q97.5", "mean", "sd", "ess", "rhat"});
  const auto& block = chain.block("theta");
  for (std::size_t v = 0; v < variables.size(); ++v) {
    std::vector<double> draws = chain.pooled("theta", static_cast<int>(v));
    std::vector<Eigen::VectorXd> per_chain;
    for (int c = 0; c < chain.n_chains(); ++c) {
      int filled = block.fill.empty() ? 0 : block.fill[static_cast<std::size_t>(c)];
      per_chain.push_back(block.draws[static_cast<std::size_t>(c)]
                              .col(static_cast<Eigen::Index>(v))
                              .head(filled));
    }
    double ess = std::nan(""), rhat = std::nan("");
    try {
      Diagnostics diag = compute_diagnostics(per_chain);
      ess = diag.ess;
      rhat = diag.rhat;
    } catch (const ConfigError&) {
    }
    w.row({variables[v], format_number(median(draws)),
           format_number(quantile_linear(draws, 0.025)),
           format_number(quantile_linear(draws, 0.975)), format_number(mean(draws)),
           format_number(sample_sd(draws)), format_number(ess), format_number(rhat)});
  }
}

}  // namespace dendrostate
