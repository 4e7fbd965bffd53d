#pragma once

#include <array>
#include <cstdint>

namespace bcbf {

/// Stateless mixing function (splitmix64 finaliser).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives a sub-stream key from a parent key and a (tag, index) pair.
std::uint64_t derive_key(std::uint64_t parent, std::uint64_t tag, std::uint64_t index = 0) noexcept;

/// Counter-based random stream.
///
/// Every draw is a pure function of (key, counter), so streams can be
/// evaluated out of order, in parallel, and reproduced bit-exactly. Used for
/// robot noise, ground-truth noise and one stream per belief sample.
///
/// Each counter owns kLanes slots; lane must be below kLanes, otherwise it
/// aliases a neighbouring counter. uniform(c, l) and normal_pair(c, l) read
/// the same slot, so callers mixing both use different lanes.
class CounterStream {
 public:
  static constexpr std::uint64_t kLanes = 4;

  explicit CounterStream(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key() const noexcept { return key_; }

  /// Uniform in (0, 1].
  double uniform(std::uint64_t counter, std::uint64_t lane = 0) const noexcept;

  /// Two independent standard normals (Box-Muller).
  std::array<double, 2> normal_pair(std::uint64_t counter, std::uint64_t lane = 0) const noexcept;

  /// Three independent standard normals.
  std::array<double, 3> normal3(std::uint64_t counter) const noexcept;

 private:
  std::uint64_t key_;
};

/// Tags separating the entities that draw randomness within one run.
enum class StreamTag : std::uint64_t {
  kRobot = 1,
  kTruthInit = 2,
  kTruthNoise = 3,
  kBeliefInit = 4,
  kBeliefNoise = 5,
  kRandomization = 6,
  kValidation = 7,
};

inline std::uint64_t derive_key(std::uint64_t parent, StreamTag tag, std::uint64_t index = 0) noexcept {
  return derive_key(parent, static_cast<std::uint64_t>(tag), index);
}

}  // namespace bcbf
