#pragma once

#include <cstdint>
#include <vector>

namespace pianofinger {

// Deterministic xoshiro256** stream. Same seed + same call sequence gives the
// same draws on every build; training trajectories and dropout masks depend on
// nothing else. `position` counts raw 64-bit draws so a restored state can be
// sanity-checked against the stream it claims to be.
class RngState {
 public:
  explicit RngState(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    ++position_;
    return result;
  }

  // Uniform in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n). n must be positive; modulo bias is negligible
  // for the small n used here (labels, part counts).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return position_; }
  const std::uint64_t* words() const { return s_; }

  void restore(std::uint64_t seed, std::uint64_t position, const std::uint64_t words[4]) {
    seed_ = seed;
    position_ = position;
    for (int i = 0; i < 4; ++i) s_[i] = words[i];
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t seed_ = 0;
  std::uint64_t position_ = 0;
  std::uint64_t s_[4] = {};
};

}  // namespace pianofinger
