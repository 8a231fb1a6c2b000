#include "dendrostate/chain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "dendrostate/csv.hpp"
#include "dendrostate/errors.hpp"
#include "dendrostate/stats.hpp"

namespace dendrostate {

PosteriorChain::PosteriorChain(int n_chains, int iterations, int burn_in, int thinning,
                               std::uint64_t seed)
    : n_chains_(n_chains), iterations_(iterations), burn_in_(burn_in), thinning_(thinning),
      seed_(seed) {
  if (n_chains < 1) throw ConfigError("chains must be >= 1");
  if (burn_in < 0 || iterations <= burn_in) throw ConfigError("iterations must exceed burn-in");
  if (thinning < 1) throw ConfigError("thinning must be >= 1");
}

PosteriorChain::Block& PosteriorChain::add_block(const std::string& name,
                                                 std::vector<std::string> labels) {
  if (index_.count(name)) throw ConfigError("duplicate chain block: " + name);
  index_[name] = blocks_.size();
  Block b;
  b.name = name;
  b.labels = std::move(labels);
  b.draws.resize(static_cast<std::size_t>(n_chains_));
  for (auto& m : b.draws) {
    m.resize(expected_stored(), static_cast<Eigen::Index>(b.labels.size()));
  }
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

bool PosteriorChain::has_block(const std::string& name) const { return index_.count(name) > 0; }

const PosteriorChain::Block& PosteriorChain::block(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown chain block: " + name);
  return blocks_[it->second];
}

void PosteriorChain::append(int chain, const std::string& name,
                            const Eigen::Ref<const Eigen::VectorXd>& v) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown chain block: " + name);
  Block& b = blocks_[it->second];
  Eigen::MatrixXd& m = b.draws.at(static_cast<std::size_t>(chain));
  if (b.fill.empty()) b.fill.assign(static_cast<std::size_t>(n_chains_), 0);
  int& row = b.fill[static_cast<std::size_t>(chain)];
  if (row >= m.rows()) throw NumericError("chain block overflow: " + name);
  if (v.size() != m.cols()) throw NumericError("chain block dimension mismatch: " + name);
  m.row(row) = v.transpose();
  ++row;
}

void PosteriorChain::append(int chain, const std::string& name, double v) {
  Eigen::VectorXd one(1);
  one[0] = v;
  append(chain, name, one);
}

int PosteriorChain::stored() const {
  if (blocks_.empty()) return 0;
  const Block& b = blocks_.front();
  if (b.fill.empty()) return 0;
  return b.fill.front();
}

std::vector<double> PosteriorChain::pooled(const std::string& name, int dim) const {
  const Block& b = block(name);
  std::vector<double> out;
  for (std::size_t c = 0; c < b.draws.size(); ++c) {
    int rows = b.fill.empty() ? 0 : b.fill[c];
    for (int r = 0; r < rows; ++r) out.push_back(b.draws[c](r, dim));
  }
  return out;
}

Eigen::VectorXd PosteriorChain::posterior_mean(const std::string& name) const {
  const Block& b = block(name);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.labels.size()));
  long n = 0;
  for (std::size_t c = 0; c < b.draws.size(); ++c) {
    int rows = b.fill.empty() ? 0 : b.fill[c];
    for (int r = 0; r < rows; ++r) sum += b.draws[c].row(r).transpose();
    n += rows;
  }
  if (n == 0) throw NumericError("no stored draws in block " + name);
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------

Diagnostics compute_diagnostics(const std::vector<Eigen::VectorXd>& chains) {
  long total = 0;
  for (const auto& c : chains) total += c.size();
  if (chains.size() < 2 && total < 200) {
    throw ConfigError("diagnostics need >=2 chains or >=200 stored draws");
  }

  // Split each chain in half.
  std::vector<Eigen::VectorXd> seqs;
  for (const auto& c : chains) {
    Eigen::Index n = c.size() / 2;
    if (n < 2) throw ConfigError("diagnostics: chain too short to split");
    seqs.push_back(c.head(n));
    seqs.push_back(c.segment(n, n));
  }
  Eigen::Index N = seqs.front().size();
  for (auto& s : seqs) N = std::min(N, s.size());
  std::size_t M = seqs.size();

  std::vector<double> means(M), vars(M);
  double grand = 0;
  for (std::size_t m = 0; m < M; ++m) {
    double mu = seqs[m].head(N).mean();
    means[m] = mu;
    grand += mu;
    double v = (seqs[m].head(N).array() - mu).square().sum() / static_cast<double>(N - 1);
    vars[m] = v;
  }
  grand /= static_cast<double>(M);

  double B = 0;
  for (double mu : means) B += (mu - grand) * (mu - grand);
  B *= static_cast<double>(N) / static_cast<double>(M - 1);
  double W = 0;
  for (double v : vars) W += v;
  W /= static_cast<double>(M);

  Diagnostics d;
  double var_plus = (static_cast<double>(N - 1) / N) * W + B / static_cast<double>(N);
  if (W <= 0.0) {
    bool between = B > 0.0;
    d.rhat = between ? std::numeric_limits<double>::infinity() : 1.0;
    d.ess = static_cast<double>(total);
    return d;
  }
  d.rhat = std::max(1.0, std::sqrt(var_plus / W));

  // Autocovariance per sequence, combined per Stan's formulation.
  Eigen::Index max_lag = N - 1;
  double tau = 1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 1; t + 1 <= max_lag; t += 2) {
    double rho_t = 0, rho_t1 = 0;
    for (int which = 0; which < 2; ++which) {
      Eigen::Index lag = t + which;
      double acov = 0;
      for (std::size_t m = 0; m < M; ++m) {
        const auto& s = seqs[m];
        double mu = means[m];
        double g = 0;
        for (Eigen::Index i = 0; i + lag < N; ++i) g += (s[i] - mu) * (s[i + lag] - mu);
        acov += g / static_cast<double>(N);
      }
      acov /= static_cast<double>(M);
      double rho = 1.0 - (W - acov) / var_plus;
      if (which == 0) rho_t = rho; else rho_t1 = rho;
    }
    double pair = rho_t + rho_t1;
    if (pair < 0) break;                    // initial positive sequence
    pair = std::min(pair, prev_pair);       // initial monotone sequence
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  d.ess = std::min(static_cast<double>(total), static_cast<double>(total) / tau);
  d.ess = std::max(d.ess, 1.0);
  return d;
}

std::vector<ChainSummaryRow> summarize_chain(const PosteriorChain& chain) {
  std::vector<ChainSummaryRow> rows;
  for (const auto& b : chain.blocks()) {
    for (std::size_t dim = 0; dim < b.labels.size(); ++dim) {
      ChainSummaryRow row;
      row.block = b.name;
      row.dimension = b.labels[dim];
      std::vector<double> pooled = chain.pooled(b.name, static_cast<int>(dim));
      if (pooled.empty()) continue;
      row.mean = mean(pooled);
      row.sd = sample_sd(pooled);
      row.median = median(pooled);
      row.q025 = quantile_linear(pooled, 0.025);
      row.q975 = quantile_linear(pooled, 0.975);
      std::vector<Eigen::VectorXd> per_chain;
      for (int c = 0; c < chain.n_chains(); ++c) {
        const Eigen::MatrixXd& m = b.draws[static_cast<std::size_t>(c)];
        int filled = b.fill.empty() ? 0 : b.fill[static_cast<std::size_t>(c)];
        per_chain.push_back(m.col(static_cast<Eigen::Index>(dim)).head(filled));
      }
      try {
        Diagnostics diag = compute_diagnostics(per_chain);
        row.ess = diag.ess;
        row.rhat = diag.rhat;
      } catch (const ConfigError&) {
        row.ess = std::nan("");
        row.rhat = std::nan("");
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_summary_csv(const std::string& path, const std::vector<ChainSummaryRow>& rows) {
  CsvWriter w(path, {"block", "dimension", "mean", "median", "sd", "q2.5", "q97.5", "ess", "rhat"});
  for (const auto& r : rows) {
    w.row({r.block, r.dimension, format_number(r.mean), format_number(r.median),
           format_number(r.sd), format_number(r.q025), format_number(r.q975),
           format_number(r.ess), format_number(r.rhat)});
  }
}

void write_chain_csv(const std::string& path_prefix, const PosteriorChain& chain) {
  for (int c = 0; c < chain.n_chains(); ++c) {
    std::vector<std::string> header = {"draw"};
    for (const auto& b : chain.blocks()) {
      for (const auto& lab : b.labels) header.push_back(b.name + ":" + lab);
    }
    CsvWriter w(path_prefix + ".chain" + std::to_string(c + 1) + ".csv", header);
    int rows = chain.stored();
    for (int r = 0; r < rows; ++r) {
      std::vector<std::string> cells = {format_number(static_cast<long long>(r))};
      for (const auto& b : chain.blocks()) {
        const Eigen::MatrixXd& m = b.draws[static_cast<std::size_t>(c)];
        for (Eigen::Index d = 0; d < m.cols(); ++d) cells.push_back(format_number(m(r, d)));
      }
      w.row(cells);
    }
  }
}

namespace {
constexpr std::uint64_t kChainMagic = 0x44454e44524f4331ULL;  // "DENDROC1"

void put_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t get_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
void put_str(std::ofstream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_str(std::ifstream& in) {
  std::uint64_t n = get_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}
}  // namespace

void write_chain_binary(const std::string& path, const PosteriorChain& chain) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  put_u64(out, kChainMagic);
  put_u64(out, static_cast<std::uint64_t>(chain.n_chains()));
  put_u64(out, static_cast<std::uint64_t>(chain.iterations()));
  put_u64(out, static_cast<std::uint64_t>(chain.burn_in()));
  put_u64(out, static_cast<std::uint64_t>(chain.thinning()));
  put_u64(out, chain.seed());
  put_u64(out, chain.blocks().size());
  for (const auto& b : chain.blocks()) {
    put_str(out, b.name);
    put_u64(out, b.labels.size());
    for (const auto& lab : b.labels) put_str(out, lab);
    for (const auto& m : b.draws) {
      std::uint64_t rows = static_cast<std::uint64_t>(chain.stored());
      put_u64(out, rows);
      for (std::uint64_t r = 0; r < rows; ++r) {
        for (Eigen::Index d = 0; d < m.cols(); ++d) {
          double v = m(static_cast<Eigen::Index>(r), d);
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
      }
    }
  }
}

PosteriorChain read_chain_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  if (get_u64(in) != kChainMagic) throw DataError(path + ": not a chain file");
  int n_chains = static_cast<int>(get_u64(in));
  int iterations = static_cast<int>(get_u64(in));
  int burn_in = static_cast<int>(get_u64(in));
  int thinning = static_cast<int>(get_u64(in));
  std::uint64_t seed = get_u64(in);
  PosteriorChain chain(n_chains, iterations, burn_in, thinning, seed);
  std::uint64_t n_blocks = get_u64(in);
  for (std::uint64_t bi = 0; bi < n_blocks; ++bi) {
    std::string name = get_str(in);
    std::uint64_t n_labels = get_u64(in);
    std::vector<std::string> labels;
    for (std::uint64_t l = 0; l < n_labels; ++l) labels.push_back(get_str(in));
    chain.add_block(name, labels);
    for (int c = 0; c < n_chains; ++c) {
      std::uint64_t rows = get_u64(in);
      for (std::uint64_t r = 0; r < rows; ++r) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(n_labels));
        for (std::uint64_t d = 0; d < n_labels; ++d) {
          double x;
          in.read(reinterpret_cast<char*>(&x), sizeof(x));
          v[static_cast<Eigen::Index>(d)] = x;
        }
        chain.append(c, name, v);
      }
    }
  }
  if (!in) throw DataError(path + ": truncated chain file");
  return chain;
}

ChainStreamer::ChainStreamer(std::string path_prefix, const PosteriorChain& chain, int every)
    : prefix_(std::move(path_prefix)), chain_(&chain), every_(every) {
  written_.assign(static_cast<std::size_t>(chain.n_chains()), 0);
}

void ChainStreamer::flush(bool force) {
  int rows = chain_->stored();
  for (int c = 0; c < chain_->n_chains(); ++c) {
    int& done = written_[static_cast<std::size_t>(c)];
    if (rows == done) continue;
    if (!force && rows - done < every_) continue;
    std::string path = prefix_ + ".chain" + std::to_string(c + 1) + ".csv";
    std::FILE* f = nullptr;
    if (done == 0) {
      f = std::fopen(path.c_str(), "wb");
      if (!f) throw DataError("cannot open for writing: " + path);
      std::string header = "draw";
      for (const auto& b : chain_->blocks()) {
        for (const auto& lab : b.labels) header += "," + b.name + ":" + lab;
      }
      header += "\n";
      std::fwrite(header.data(), 1, header.size(), f);
    } else {
      f = std::fopen(path.c_str(), "ab");
      if (!f) throw DataError("cannot append: " + path);
    }
    for (int r = done; r < rows; ++r) {
      std::string line = format_number(static_cast<long long>(r));
      for (const auto& b : chain_->blocks()) {
        const Eigen::MatrixXd& m = b.draws[static_cast<std::size_t>(c)];
        for (Eigen::Index d = 0; d < m.cols(); ++d) line += "," + format_number(m(r, d));
      }
      line += "\n";
      std::fwrite(line.data(), 1, line.size(), f);
    }
    std::fclose(f);
    done = rows;
  }
}

}  // namespace dendrostate
