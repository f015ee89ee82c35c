#ifndef UFGKIT_RNG_HPP
#define UFGKIT_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

namespace ufg {

/// Counter-based block cipher (Philox-4x32, 10 rounds). A block is
/// addressed by (key, stream, block) with no sequential state, so any
/// path of a Monte Carlo run can regenerate its noise independently of
/// scheduling order.
inline std::array<std::uint32_t, 4> philox4x32(std::uint64_t key, std::uint64_t stream,
                                               std::uint64_t block) {
  std::uint32_t c0 = static_cast<std::uint32_t>(stream);
  std::uint32_t c1 = static_cast<std::uint32_t>(stream >> 32);
  std::uint32_t c2 = static_cast<std::uint32_t>(block);
  std::uint32_t c3 = static_cast<std::uint32_t>(block >> 32);
  std::uint32_t k0 = static_cast<std::uint32_t>(key);
  std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c0;
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c2;
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    c0 = hi1 ^ c1 ^ k0;
    c1 = lo1;
    c2 = hi0 ^ c3 ^ k1;
    c3 = lo0;
    k0 += kW0;
    k1 += kW1;
  }
  return {c0, c1, c2, c3};
}

/// Sequential view over one path's noise: standard normals produced
/// four at a time from a Philox block via Box-Muller. Reconstructing a
/// stream from the same (seed, path) replays the identical sequence,
/// which is what common-random-number pairing relies on.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t path) : key_(seed), stream_(path) {}

  double next_normal() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

 private:
  void refill() {
    const std::array<std::uint32_t, 4> w = philox4x32(key_, stream_, block_++);
    const double u0 = (static_cast<double>(w[0]) + 0.5) * 0x1p-32;
    const double u1 = (static_cast<double>(w[1]) + 0.5) * 0x1p-32;
    const double u2 = (static_cast<double>(w[2]) + 0.5) * 0x1p-32;
    const double u3 = (static_cast<double>(w[3]) + 0.5) * 0x1p-32;
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    const double r0 = std::sqrt(-2.0 * std::log(u0));
    const double r1 = std::sqrt(-2.0 * std::log(u2));
    buf_[0] = r0 * std::cos(kTwoPi * u1);
    buf_[1] = r0 * std::sin(kTwoPi * u1);
    buf_[2] = r1 * std::cos(kTwoPi * u3);
    buf_[3] = r1 * std::sin(kTwoPi * u3);
    pos_ = 0;
  }

  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  double buf_[4] = {0, 0, 0, 0};
  int pos_ = 4;
};

}  // namespace ufg

#endif
