#include "gemdp/rng.hpp"

namespace gemdp {

namespace {

constexpr std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t stream_bits(const StreamKey& key) {
  std::uint64_t h = mix(key.seed);
  h = mix(h ^ key.user);
  h = mix(h ^ key.period);
  h = mix(h ^ static_cast<std::uint64_t>(key.purpose));
  h = mix(h ^ key.index);
  return h;
}

double uniform01(const StreamKey& key) {
  const std::uint64_t bits = stream_bits(key) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace gemdp
