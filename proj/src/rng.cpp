#include "bcbf/rng.hpp"

#include <cassert>
#include <cmath>
#include <numbers>

namespace bcbf {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t parent, std::uint64_t tag, std::uint64_t index) noexcept {
  return mix64(mix64(parent ^ mix64(tag)) + mix64(index ^ 0x632be59bd9b4e019ULL));
}

namespace {

inline double to_unit_open_closed(std::uint64_t bits) noexcept {
  // 53 random bits mapped to (0, 1].
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

double CounterStream::uniform(std::uint64_t counter, std::uint64_t lane) const noexcept {
  assert(lane < kLanes);
  return to_unit_open_closed(mix64(key_ ^ mix64(counter * kLanes + lane)));
}

std::array<double, 2> CounterStream::normal_pair(std::uint64_t counter, std::uint64_t lane) const noexcept {
  assert(lane < kLanes);
  const std::uint64_t base = mix64(key_ ^ mix64(counter * kLanes + lane));
  const double u1 = to_unit_open_closed(base);
  const double u2 = to_unit_open_closed(mix64(base));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(phi), r * std::sin(phi)};
}

std::array<double, 3> CounterStream::normal3(std::uint64_t counter) const noexcept {
  const auto a = normal_pair(counter, 0);
  const auto b = normal_pair(counter, 1);
  return {a[0], a[1], b[0]};
}

}  // namespace bcbf
