#include <doctest.h>

#include <set>

#include "gemdp/rng.hpp"

using namespace gemdp;

TEST_CASE("stream draws are a pure function of the key") {
  const StreamKey k{42, 7, 3, Purpose::Engage, 0};
  CHECK(uniform01(k) == uniform01(k));
  CHECK(stream_bits(k) == stream_bits(k));
  std::set<std::uint64_t> seen;
  for (StreamKey v : {StreamKey{43, 7, 3, Purpose::Engage, 0}, StreamKey{42, 8, 3, Purpose::Engage, 0},
                      StreamKey{42, 7, 4, Purpose::Engage, 0}, StreamKey{42, 7, 3, Purpose::Retain, 0},
                      StreamKey{42, 7, 3, Purpose::Engage, 1}, k}) {
    seen.insert(stream_bits(v));
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("uniform draws are open-interval and roughly uniform") {
  const int n = 200000;
  double sum = 0.0;
  int low = 0;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01({1, static_cast<std::uint64_t>(i), 0, Purpose::Test, 0});
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    if (u < 0.1) ++low;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(static_cast<double>(low) / n == doctest::Approx(0.1).epsilon(0.05));
}
