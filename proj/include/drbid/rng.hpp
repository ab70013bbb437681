#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace drbid {

// A seeded random stream. The same (seed, stream) pair always yields the same
// sequence of draws, so independent consumers take separate stream ids.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  double uniform();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool bernoulli(double p);
  std::size_t index(std::size_t n);

  // Child stream derived from this stream's identity (not its position).
  Rng split(std::uint64_t child) const;

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace drbid
