#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace mpforge {

/// Seeded random stream. Streams are derived from a (seed, name) pair so that
/// every (trial, role) combination draws from its own independent sequence,
/// independent of scheduling order.
class Rng {
 public:
  explicit Rng(std::uint64_t key);

  /// Stream for `name` under top-level `seed`, e.g. stream(42, "trial/7/matrix").
  static Rng stream(std::uint64_t seed, std::string_view name);

  /// Sub-stream keyed by this stream's key and `name`.
  Rng child(std::string_view name) const;

  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  double normal();                     // N(0, 1)
  bool bernoulli(double p);

  Eigen::VectorXd normal_vector(Eigen::Index n, double sd = 1.0);
  void fill_normal(double* out, std::size_t n, double sd = 1.0);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

/// "trial/<index>/<role>"
std::string trial_stream_name(std::size_t trial, std::string_view role);

}  // namespace mpforge
