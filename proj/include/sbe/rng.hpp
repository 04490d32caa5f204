#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sbe {

/* Counter-based random number generation.
 *
 * Draw i of a stream is mix64(key + i * gamma): a stateless function of the
 * stream key and the draw index.  Streams for distinct (path, mode) pairs are
 * derived by hashing the master seed with the pair, so noise for path 7 is
 * the same whether paths run serially or on sixteen threads, and the first N
 * modes of a bundle do not depend on how many modes are generated in total.
 * Gaussians come from an explicit Box-Muller transform; std::normal_distribution
 * is implementation-defined and would not reproduce bit-for-bit across
 * standard libraries.
 */

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t stream_key(std::uint64_t master_seed, std::uint64_t path,
                                   std::uint64_t mode) noexcept {
  std::uint64_t k = mix64(master_seed + 0x9e3779b97f4a7c15ull);
  k = mix64(k ^ mix64(path + 0xbf58476d1ce4e5b9ull));
  k = mix64(k ^ mix64(mode + 0x94d049bb133111ebull));
  return k;
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t key) noexcept : key_(key) {}
  RngStream(std::uint64_t master_seed, std::uint64_t path, std::uint64_t mode) noexcept
      : key_(stream_key(master_seed, path, mode)) {}

  std::uint64_t next_u64() noexcept {
    return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ull);
  }

  // Uniform on (0, 1), strictly excluding both endpoints.
  double next_uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  double next_gaussian() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace sbe
