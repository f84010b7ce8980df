#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bbm {

/// Philox4x32-10 counter-based generator (Salmon et al.). Stateless: the
/// output block is a pure function of (counter, key).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Block generate(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// A stream of variates keyed by (seed, subject, lane). The subject is usually
/// a particle id (48 bits used), the lane separates independent purposes
/// (lifetime, offspring, path) so that each purpose draws the same numbers no
/// matter how many draws other purposes consumed. `seek` jumps to a block so a
/// caller can key draws to an event index without storing generator state.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t subject, std::uint32_t lane)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        subject_(subject),
        lane_(lane) {}

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    if (cursor_ == 2) refill();
    return buffer_[cursor_++];
  }

  double exponential() { return -std::log(uniform()); }

  /// Standard normal by Box-Muller; both variates of a pair are used.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  void seek(std::uint64_t block) {
    counter_ = block;
    cursor_ = 2;
    has_spare_ = false;
  }

  std::uint64_t blocks_used() const { return counter_; }

 private:
  static double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  void refill() {
    const Philox4x32::Block ctr{
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(subject_),
        static_cast<std::uint32_t>((subject_ >> 32) & 0xFFFFu) | (lane_ << 16)};
    const auto out = Philox4x32::generate(ctr, key_);
    buffer_ = {to_open_unit(out[0], out[1]), to_open_unit(out[2], out[3])};
    ++counter_;
    cursor_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t subject_;
  std::uint32_t lane_;
  std::uint64_t counter_ = 0;
  std::array<double, 2> buffer_{};
  int cursor_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

enum class Lane : std::uint32_t {
  Lifetime = 1,
  Offspring = 2,
  Path = 3,
  Experiment = 4,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of replica `index` in a farm seeded with `seed`.
inline constexpr std::uint64_t replica_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 1));
}

inline Stream make_stream(std::uint64_t seed, std::uint64_t subject, Lane lane) {
  return Stream(seed, subject, static_cast<std::uint32_t>(lane));
}

}  // namespace bbm
