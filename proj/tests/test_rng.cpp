// Deterministic RNG layer: stream derivation, hand-rolled distributions.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "saeda/rng.hpp"

using namespace saeda;

TEST_CASE("same seed, same sequence") {
  rng::Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.bits() == b.bits());
}

TEST_CASE("derive separates purposes and indices") {
  uint64_t base = 7;
  CHECK(rng::derive(base, rng::tag("alpha"), 0) != rng::derive(base, rng::tag("beta"), 0));
  CHECK(rng::derive(base, rng::tag("alpha"), 0) != rng::derive(base, rng::tag("alpha"), 1));
  CHECK(rng::derive(base, rng::tag("alpha"), 3) == rng::derive(base, rng::tag("alpha"), 3));
}

TEST_CASE("uniform lies in [0,1) with sane moments") {
  rng::Rng r(1);
  double sum = 0, sq = 0;
  int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sq += u * u;
  }
  double mean = sum / n, var = sq / n - mean * mean;
  CHECK(std::abs(mean - 0.5) < 0.01);
  CHECK(std::abs(var - 1.0 / 12.0) < 0.005);
}

TEST_CASE("normal has sane moments") {
  rng::Rng r(2);
  double sum = 0, sq = 0;
  int n = 20000;
  for (int i = 0; i < n; ++i) {
    double z = r.normal();
    sum += z;
    sq += z * z;
  }
  double mean = sum / n, var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("below covers [0,n) roughly uniformly") {
  rng::Rng r(3);
  int n = 7;
  std::vector<int> hist(n, 0);
  for (int i = 0; i < 7000; ++i) {
    int v = r.below(n);
    REQUIRE(v >= 0);
    REQUIRE(v < n);
    ++hist[v];
  }
  for (int k = 0; k < n; ++k) CHECK(hist[k] > 700); // expectation 1000
}

TEST_CASE("shuffle is deterministic and a permutation") {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7}, v2 = v1, sorted = v1;
  rng::Rng a(9), b(9);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> s = v1;
  std::sort(s.begin(), s.end());
  CHECK(s == sorted);
}

TEST_CASE("glorot init is bounded and deterministic") {
  rng::Rng a(5), b(5);
  int fan_in = 30, fan_out = 20;
  std::vector<float> w1(600), w2(600);
  rng::glorot_uniform(a, fan_in, fan_out, w1.data(), w1.size());
  rng::glorot_uniform(b, fan_in, fan_out, w2.data(), w2.size());
  CHECK(w1 == w2);
  float bound = std::sqrt(6.0f / (fan_in + fan_out));
  for (float v : w1) {
    CHECK(v >= -bound);
    CHECK(v <= bound);
  }
  // not degenerate
  float mn = 1e9f, mx = -1e9f;
  for (float v : w1) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  CHECK(mx - mn > bound);
}
