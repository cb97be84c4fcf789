#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace augmix {

/// Deterministic counter-based random stream (Philox4x32-10).
///
/// Every stochastic component of the library draws from this engine, so a
/// (seed, draw order) pair pins the entire pipeline. Streams are splittable:
/// `child(i)` derives an independent substream by running the block cipher
/// over the child index, which is how per-image and per-cell streams are
/// created without sharing state.
class PhiloxRng {
 public:
  PhiloxRng() : PhiloxRng(0) {}

  explicit PhiloxRng(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)} {}

  /// Raw 10-round Philox4x32 block. Exposed so the engine can be checked
  /// against the published known-answer vectors.
  static std::array<std::uint32_t, 4> block(
      const std::array<std::uint32_t, 2>& key,
      const std::array<std::uint32_t, 4>& counter) {
    return philox_block(key, counter);
  }

  /// Independent substream keyed by (this stream's key, index).
  /// Does not advance this stream.
  PhiloxRng child(std::uint64_t index) const {
    const std::array<std::uint32_t, 4> block = philox_block(
        key_, {static_cast<std::uint32_t>(index),
               static_cast<std::uint32_t>(index >> 32), 0x9E3779B9u,
               0x3C6EF372u});
    PhiloxRng out;
    out.key_ = {block[0], block[1]};
    return out;
  }

  std::uint32_t next_u32() {
    if (block_pos_ >= 4) refill();
    return block_[static_cast<std::size_t>(block_pos_++)];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform on [0,1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on {0, ..., n-1}. Consumes exactly one 64-bit draw.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be > 0");
    const auto x = static_cast<unsigned __int128>(next_u64());
    return static_cast<std::uint64_t>((x * n) >> 64);
  }

  /// Uniform on {lo, ..., hi} inclusive. Consumes exactly one 64-bit draw.
  int uniform_int(int lo, int hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    const auto span = static_cast<std::uint64_t>(hi) -
                      static_cast<std::uint64_t>(lo) + 1;
    return lo + static_cast<int>(uniform_index(span));
  }

  /// Standard normal via Box-Muller. Consumes two 64-bit draws.
  double normal() {
    const double u1 = 1.0 - next_double();  // (0,1], keeps log finite
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang, with the shape<1 boost.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0);
      const double u = 1.0 - next_double();  // (0,1]
      return g * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double x = normal();
      const double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      const double v = t * t * t;
      const double u = next_double();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Beta(a, b) as a Gamma ratio g1 / (g1 + g2).
  double beta(double a, double b) {
    const double g1 = gamma(a);
    const double g2 = gamma(b);
    const double sum = g1 + g2;
    if (sum <= 0.0) return 0.5;  // both gammas underflowed to zero
    return g1 / sum;
  }

  /// Symmetric Dirichlet via k Gamma(alpha, 1) draws, normalized.
  std::vector<double> dirichlet(std::size_t k, double alpha) {
    if (k == 0) throw std::invalid_argument("dirichlet: k must be > 0");
    std::vector<double> w(k);
    double sum = 0.0;
    for (auto& wi : w) {
      wi = gamma(alpha);
      sum += wi;
    }
    if (sum <= 0.0) {
      for (auto& wi : w) wi = 1.0 / static_cast<double>(k);
      return w;
    }
    for (auto& wi : w) wi /= sum;
    return w;
  }

 private:
  static std::array<std::uint32_t, 4> philox_block(
      std::array<std::uint32_t, 2> key, std::array<std::uint32_t, 4> ctr) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }

  void refill() {
    block_ = philox_block(key_, counter_);
    block_pos_ = 0;
    for (auto& word : counter_) {
      if (++word != 0) break;  // 128-bit increment
    }
  }

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
};

}  // namespace augmix
