#pragma once

#include <cstdint>
#include <random>

namespace riskmap {

// splitmix64 step; used to derive independent stream seeds from a base seed.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix64(mix64(base) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// Thin RNG wrapper so every consumer draws from an explicitly seeded stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double normal() { return normal_(gen_); }
  double uniform() { return uniform_(gen_); }
  long poisson(double mean) {
    std::poisson_distribution<long> d(mean);
    return d(gen_);
  }
  std::uint64_t raw() { return gen_(); }
  // index in [0, n)
  int uniform_index(int n) {
    std::uniform_int_distribution<int> d(0, n - 1);
    return d(gen_);
  }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace riskmap
