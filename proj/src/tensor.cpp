#include "ion/tensor.hpp"

#include <cmath>
#include <sstream>

namespace ion {

std::string FeatureMap::shape_str() const {
  std::ostringstream os;
  os << channels << "x" << height << "x" << width;
  return os.str();
}

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const FeatureMap& m) { return all_finite(m.v); }

void Rng::reseed(uint64_t seed) {
  state_ = seed;
  has_spare_ = false;
  spare_ = 0.0;
  // Warm up so that small seeds diverge immediately.
  next_u64();
  next_u64();
}

uint64_t Rng::next_u64() {
  // splitmix64 (Steele et al.); period 2^64, passes BigCrush.
  state_ += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform01() {
  // 53 random bits -> [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int Rng::uniform_int(int n) {
  check(n > 0, "Rng::uniform_int: n must be positive");
  // Lemire's multiply-shift; bias is < 2^-32 for desk-scale n.
  return static_cast<int>((static_cast<unsigned __int128>(next_u64()) * static_cast<uint64_t>(n)) >> 64);
}

Rng Rng::fork(uint64_t key) {
  uint64_t mixed = next_u64() ^ (key * 0x9e3779b97f4a7c15ULL);
  return Rng(mixed);
}

}  // namespace ion
