#include <doctest.h>

#include <cmath>
#include <set>

#include "emulab/rng.hpp"

using emulab::Rng;

TEST_CASE("same seed, stream and counter reproduce the sequence") {
  Rng a(42, "channel/ab", 3);
  Rng b(42, "channel/ab", 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("streams and counters are separated") {
  std::set<std::uint64_t> firsts;
  for (const char* stream : {"channel/ab", "channel/ba", "payload/ab"})
    for (std::uint64_t c = 0; c < 50; ++c) firsts.insert(Rng(42, stream, c).next());
  CHECK(firsts.size() == 150);
  CHECK(emulab::derive_seed(1, "x", 0) != emulab::derive_seed(2, "x", 0));
}

TEST_CASE("complex gaussian has the requested power and no bias") {
  Rng rng(9);
  const int n = 200000;
  double power = 0.0, re = 0.0, im = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto z = rng.complex_gaussian(2.5);
    power += std::norm(z);
    re += z.real();
    im += z.imag();
  }
  CHECK(power / n == doctest::Approx(2.5).epsilon(0.01));
  CHECK(std::abs(re / n) < 0.01);
  CHECK(std::abs(im / n) < 0.01);
}

TEST_CASE("bits are balanced") {
  Rng rng(5);
  int ones = 0;
  for (int i = 0; i < 100000; ++i) ones += rng.bit();
  CHECK(std::abs(ones - 50000) < 1000);
}
