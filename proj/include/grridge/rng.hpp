#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace grridge {

// mt19937_64 with explicitly coded uniform/normal transforms, so streams do
// not depend on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the spare deviate is cached.
  double normal();

  // Uniform integer on [0, n), unbiased via rejection.
  int uniform_int(int n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(uniform_int(i + 1))]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives a component-specific seed from one base seed, so every randomized
// component gets its own reproducible stream.
std::uint64_t component_seed(std::uint64_t base, std::string_view component);

}  // namespace grridge
