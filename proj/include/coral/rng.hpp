#ifndef CORAL_RNG_HPP
#define CORAL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace coral {

// mt19937_64 with our own value mappings. The standard distributions are
// implementation-defined, which would break bit-reproducibility claims across
// standard libraries; these mappings are fixed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds, rejection-free modulo bias acceptable at these ranges
  int uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  // Box-Muller, one value per call (the pair's partner is discarded so the
  // draw count per call is fixed).
  double normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = engine_() % i;
      std::swap(v[i - 1], v[j]);
    }
  }

  // n distinct indices from [0, pool_size), order of first appearance
  std::vector<int> sample_without_replacement(int pool_size, int n) {
    std::vector<int> idx(pool_size);
    for (int i = 0; i < pool_size; ++i) idx[i] = i;
    shuffle(idx);
    idx.resize(static_cast<size_t>(n < pool_size ? n : pool_size));
    return idx;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace coral

#endif
