#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace dendrostate {

// Deterministic random source. All samplers draw through this class so a
// run is reproducible from a single seed; named sub-streams keep draws
// independent across stages, chains, and replicates without coordination.
//
// The variate algorithms are fixed here (polar normal, Marsaglia-Tsang
// gamma, Michael-Schucany-Haas inverse Gaussian) rather than delegated to
// std:: distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Sub-stream derivation: hash the label into the seed. Streams with
  // distinct labels are independent for practical purposes.
  static Rng stream(std::uint64_t seed, std::string_view label);
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  // Uniform on (0,1), never returns 0 or 1.
  double uniform();
  double uniform(double lo, double hi);
  std::uint64_t integer(std::uint64_t n);  // uniform on [0, n)

  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Shape/rate parametrization: mean = shape/rate.
  double gamma(double shape, double rate);
  double chi_square(double df) { return gamma(0.5 * df, 0.5); }
  double exponential(double rate);

  // Mean mu > 0, shape lambda > 0.
  double inverse_gaussian(double mu, double lambda);

  Eigen::VectorXd normal_vector(int n);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 step, also used for hashing stage labels into seeds.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t hash_label(std::uint64_t seed, std::string_view label);

}  // namespace dendrostate
