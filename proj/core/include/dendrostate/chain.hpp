#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dendrostate {

// Stored MCMC draws, organized as named parameter blocks with one draw
// matrix per chain. Burn-in and thinning are applied by the sampler
// before append(); summaries are computed on stored draws only.
class PosteriorChain {
 public:
  struct Block {
    std::string name;
    std::vector<std::string> labels;      // per dimension
    std::vector<Eigen::MatrixXd> draws;   // per chain: stored x dim
    std::vector<int> fill;                // per chain: rows appended so far
  };

  PosteriorChain() = default;
  PosteriorChain(int n_chains, int iterations, int burn_in, int thinning, std::uint64_t seed);

  int n_chains() const { return n_chains_; }
  int iterations() const { return iterations_; }
  int burn_in() const { return burn_in_; }
  int thinning() const { return thinning_; }
  std::uint64_t seed() const { return seed_; }
  int expected_stored() const { return (iterations_ - burn_in_) / thinning_; }
  bool keep(int iteration) const {  // iteration is 0-based
    return iteration >= burn_in_ && (iteration - burn_in_) % thinning_ == 0;
  }

  Block& add_block(const std::string& name, std::vector<std::string> labels);
  bool has_block(const std::string& name) const;
  const Block& block(const std::string& name) const;

  void append(int chain, const std::string& name, const Eigen::Ref<const Eigen::VectorXd>& v);
  void append(int chain, const std::string& name, double v);

  int stored() const;  // rows stored in the first chain of the first block

  // Pooled draws across chains for one dimension of a block.
  std::vector<double> pooled(const std::string& name, int dim) const;
  Eigen::VectorXd posterior_mean(const std::string& name) const;

  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  int n_chains_ = 1, iterations_ = 0, burn_in_ = 0, thinning_ = 1;
  std::uint64_t seed_ = 0;
  std::vector<Block> blocks_;
  std::map<std::string, std::size_t> index_;
};

struct Diagnostics {
  double rhat = 1.0;
  double ess = 0.0;
};

// Split-R-hat and effective sample size over one or more chains of draws
// for a single quantity. Chains are split in half, Geyer's initial
// positive sequence truncates the autocorrelation sum, and ESS is capped
// at the stored draw count. Throws ConfigError when there are fewer than
// 2 chains and fewer than 200 draws.
Diagnostics compute_diagnostics(const std::vector<Eigen::VectorXd>& chains);

struct ChainSummaryRow {
  std::string block;
  std::string dimension;
  double mean = 0, median = 0, sd = 0, q025 = 0, q975 = 0, ess = 0, rhat = 1;
};

std::vector<ChainSummaryRow> summarize_chain(const PosteriorChain& chain);
void write_summary_csv(const std::string& path, const std::vector<ChainSummaryRow>& rows);

// Raw draw storage. CSV: one file per chain with iteration + one column
// per block dimension. Binary: a self-describing columnar layout
// (magic, block table, little-endian doubles).
void write_chain_csv(const std::string& path_prefix, const PosteriorChain& chain);
void write_chain_binary(const std::string& path, const PosteriorChain& chain);
PosteriorChain read_chain_binary(const std::string& path);

// Incremental CSV writer used for crash-safe long runs: call flush()
// every so many iterations to append newly stored rows.
class ChainStreamer {
 public:
  ChainStreamer(std::string path_prefix, const PosteriorChain& chain, int every = 100);
  void flush(bool force = false);

 private:
  std::string prefix_;
  const PosteriorChain* chain_;
  int every_;
  std::vector<int> written_;  // per chain
};

}  // namespace dendrostate
