#ifndef ION_TENSOR_HPP_
#define ION_TENSOR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ion {

// Dense rank-3 feature map, double precision, row-major by (channel, row, col).
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> v;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w) : channels(c), height(h), width(w), v(static_cast<size_t>(c) * h * w, 0.0) {}

  double& at(int c, int y, int x) { return v[(static_cast<size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return v[(static_cast<size_t>(c) * height + y) * width + x]; }

  size_t size() const { return v.size(); }
  bool same_shape(const FeatureMap& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  std::string shape_str() const;
  void fill(double value) { v.assign(v.size(), value); }
};

// Throws std::invalid_argument when cond is false.
void check(bool cond, const std::string& msg);

// True iff every entry is finite (no NaN/Inf).
bool all_finite(const std::vector<double>& v);
bool all_finite(const FeatureMap& m);

// Deterministic RNG with explicitly specified algorithms so that results
// depend only on the seed, not on the standard library's distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed);
  uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform01();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller.
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }
  // Uniform integer in [0, n), n > 0.
  int uniform_int(int n);
  // Derive an independent child stream (stable given seed and key).
  Rng fork(uint64_t key);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  // xorshift-based splitmix64 generator; small, fast, fully specified.
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ion

#endif  // ION_TENSOR_HPP_
