#include <doctest.h>

#include <cmath>
#include <set>

#include "cinexai/rng.hpp"

using namespace cinexai;

TEST_CASE("derived seeds are pure and separate streams") {
  CHECK(derive_seed(7, Stream::phantom, 3) == derive_seed(7, Stream::phantom, 3));
  std::set<std::uint64_t> seen;
  for (auto stream : {Stream::phantom, Stream::disease_assignment, Stream::init, Stream::shuffle, Stream::augment,
                      Stream::noise, Stream::split}) {
    for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(7, stream, i));
  }
  CHECK(seen.size() == 350);
  CHECK(derive_seed(7, Stream::init) != derive_seed(8, Stream::init));
}

TEST_CASE("same seed replays the same draws") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
    CHECK(a.uniform_int(-3, 5) == b.uniform_int(-3, 5));
  }
}

TEST_CASE("uniform draws stay in range and cover it") {
  Rng rng(1);
  std::set<std::int64_t> ints;
  for (int i = 0; i < 5000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const auto k = rng.uniform_int(-2, 2);
    CHECK(k >= -2);
    CHECK(k <= 2);
    ints.insert(k);
  }
  CHECK(ints.size() == 5);
}

TEST_CASE("normal draws have unit moments") {
  Rng rng(9);
  const int n = 200000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.02);
}
