#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace lingo {

// Seeded generator used for every stochastic decision in the project.
// Only the raw engine output is used, so draws are identical across
// standard library implementations and the full state can be persisted.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller; consumes two draws, caches nothing.
  double normal();

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

  // Independent generator derived from this one's next output.
  Rng split() { return Rng(next_u64() ^ 0x9e3779b97f4a7c15ULL); }

  std::string state() const;
  void restore(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lingo
