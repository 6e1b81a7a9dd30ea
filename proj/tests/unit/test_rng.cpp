#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "nsbm/error.hpp"
#include "nsbm/rng.hpp"

using namespace nsbm;

TEST_CASE("equal seeds give equal streams") {
  Rng a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("streams are keyed by seed and stream id") {
  Rng r(0, 0);
  const std::uint64_t first = r.next_u64();
  Rng again(0, 0);
  CHECK(again.next_u64() == first);
  Rng other_stream(0, 1);
  CHECK(other_stream.next_u64() != first);
  Rng other_seed(1, 0);
  CHECK(other_seed.next_u64() != first);
}

TEST_CASE("derive does not advance the parent") {
  Rng a(7);
  Rng b(7);
  auto child = a.derive(5);
  (void)child.next_u64();
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.derive(5).next_u64() == b.derive(5).next_u64());
  CHECK(a.derive(5).next_u64() != a.derive(6).next_u64());
}

TEST_CASE("uniform moments") {
  Rng r(1);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    s += u;
    s2 += u * u;
  }
  CHECK(std::abs(s / n - 0.5) < 0.005);
  CHECK(std::abs(s2 / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("normal moments") {
  Rng r(2);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("below stays in range and covers it") {
  Rng r(3);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = r.below(7);
    REQUIRE(v < 7);
    ++hist[v];
  }
  for (int h : hist) CHECK(std::abs(h - 10000) < 500);
  CHECK_THROWS_AS(r.below(0), ConfigError);
}

TEST_CASE("sample without replacement gives distinct indices") {
  Rng r(4);
  for (std::size_t k : {0u, 1u, 5u, 10u, 20u}) {
    auto s = r.sample_without_replacement(10, k);
    CHECK(s.size() == std::min<std::size_t>(k, 10));
    std::set<std::size_t> u(s.begin(), s.end());
    CHECK(u.size() == s.size());
    for (auto v : s) CHECK(v < 10);
  }
}

TEST_CASE("shuffle is a permutation") {
  Rng r(5);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  r.shuffle(w);
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}
