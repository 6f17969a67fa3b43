#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace treefx {

/// Derives a stream seed from a master seed and up to three cell coordinates
/// (splitmix64 mixing). Used so that parallel benchmark cells are independent
/// of scheduling order.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

/// Random source for every sampler in the library.
///
/// Backed by std::mt19937_64 with explicit 64-bit seeding. A fixed seed gives
/// bit-identical draw sequences on the same platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x7265656678ULL);

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double sd);
  /// Gamma(shape, 1).
  double gamma(double shape);
  /// log of a Gamma(shape, 1) draw. Stable for shapes far below one, where the
  /// draw itself underflows.
  double log_gamma_variate(double shape);
  double chi_squared(double dof);
  /// N(mean, 1) truncated to (0, inf) when `positive`, else to (-inf, 0).
  double truncated_normal(double mean, bool positive);
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);
  /// Index drawn with probability proportional to the (nonnegative) weights.
  std::size_t categorical(std::span<const double> weights);
  /// Same, for weights given on the log scale.
  std::size_t categorical_log(std::span<const double> log_weights);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace treefx
