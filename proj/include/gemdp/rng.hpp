#pragma once

#include <cstdint>

namespace gemdp {

// Every stochastic draw in the library is addressed by a key rather than
// pulled from a stateful engine, so two runs that ask for the same key see the
// same number regardless of call order or thread schedule.
enum class Purpose : std::uint32_t {
  TypeGamma = 1,
  TypeTheta,
  QueryR,
  QueryPsi,
  Engage,
  Retain,
  Panel,
  LogUser,
  LogState,
  LogQuery,
  LogAction,
  LogEngage,
  LogReturn,
  Test,
};

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t user = 0;
  std::uint64_t period = 0;
  Purpose purpose = Purpose::Test;
  std::uint64_t index = 0;
};

/// 64 uniformly mixed bits for the key (SplitMix64 finalizer chained over the fields).
std::uint64_t stream_bits(const StreamKey& key);

/// Uniform draw in the open interval (0, 1) with 53 bits of resolution.
double uniform01(const StreamKey& key);

}  // namespace gemdp
