#include "mpforge/rng.hpp"

#include <fmt/format.h>

namespace mpforge {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t key) : key_(key) {
  // Expand the key into a full seed sequence so nearby keys give unrelated states.
  std::uint64_t s = key;
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(s)), static_cast<std::uint32_t>(splitmix64(s) >> 32),
                    static_cast<std::uint32_t>(splitmix64(s + 1)), static_cast<std::uint32_t>(splitmix64(s + 1) >> 32),
                    static_cast<std::uint32_t>(splitmix64(s + 2)), static_cast<std::uint32_t>(splitmix64(s + 2) >> 32)};
  engine_.seed(seq);
}

Rng Rng::stream(std::uint64_t seed, std::string_view name) {
  return Rng(splitmix64(splitmix64(seed) ^ fnv1a64(name)));
}

Rng Rng::child(std::string_view name) const { return stream(key_, name); }

double Rng::uniform() { return unit_(engine_); }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * unit_(engine_); }

double Rng::normal() { return normal_(engine_); }

bool Rng::bernoulli(double p) { return unit_(engine_) < p; }

Eigen::VectorXd Rng::normal_vector(Eigen::Index n, double sd) {
  Eigen::VectorXd v(n);
  fill_normal(v.data(), static_cast<std::size_t>(n), sd);
  return v;
}

void Rng::fill_normal(double* out, std::size_t n, double sd) {
  for (std::size_t i = 0; i < n; ++i) out[i] = sd * normal_(engine_);
}

std::string trial_stream_name(std::size_t trial, std::string_view role) {
  return fmt::format("trial/{}/{}", trial, role);
}

}  // namespace mpforge
