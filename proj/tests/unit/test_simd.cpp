#include <cmath>
#include <vector>

#include "doctest.h"
#include "nsbm/rng.hpp"
#include "nsbm/simd.hpp"

using namespace nsbm;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

double tol(std::size_t n) { return 1e-13 * static_cast<double>(n + 1); }

}  // namespace

TEST_CASE("scalar kernel is always listed first") {
  auto all = simd::available_kernels();
  REQUIRE_FALSE(all.empty());
  CHECK(all.front()->isa == simd::Isa::scalar);
  CHECK(simd::isa_name(simd::kernels().isa).size() > 0);
}

TEST_CASE("every kernel variant matches the scalar reference") {
  Rng rng(11);
  const auto& ref = simd::scalar_kernels();
  for (const auto* k : simd::available_kernels()) {
    CAPTURE(simd::isa_name(k->isa));
    // Lengths straddle every unroll boundary and tail.
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 100u, 1001u}) {
      CAPTURE(n);
      auto a = random_vec(rng, n);
      auto b = random_vec(rng, n);
      CHECK(std::abs(k->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol(n));
      CHECK(std::abs(k->sum(a.data(), n) - ref.sum(a.data(), n)) <= tol(n));

      auto y1 = b, y2 = b;
      k->axpy(y1.data(), 0.37, a.data(), n);
      ref.axpy(y2.data(), 0.37, a.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == y2[i]);

      auto s1 = a, s2 = a;
      k->scale(s1.data(), -1.7, n);
      ref.scale(s2.data(), -1.7, n);
      for (std::size_t i = 0; i < n; ++i) CHECK(s1[i] == s2[i]);
    }
  }
}

TEST_CASE("kernels handle unaligned pointers") {
  Rng rng(12);
  auto a = random_vec(rng, 40);
  auto b = random_vec(rng, 40);
  const auto& ref = simd::scalar_kernels();
  for (const auto* k : simd::available_kernels()) {
    CHECK(std::abs(k->dot(a.data() + 1, b.data() + 3, 33) - ref.dot(a.data() + 1, b.data() + 3, 33)) <= tol(33));
  }
}

TEST_CASE("exact small cases") {
  const double a[] = {1, 2, 3, 4, 5};
  const double b[] = {5, 4, 3, 2, 1};
  for (const auto* k : simd::available_kernels()) {
    CHECK(k->dot(a, b, 5) == 35.0);
    CHECK(k->sum(a, 5) == 15.0);
  }
}
