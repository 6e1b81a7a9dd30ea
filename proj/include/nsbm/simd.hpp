#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace nsbm::simd {

// Inner-loop kernels. Every kernel has a scalar reference version; wider
// variants are picked once per process from what the CPU reports. Set
// NSBM_SIMD=scalar in the environment to force the reference path.

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y[i] += alpha * x[i]
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
  /// y[i] *= alpha
  void (*scale)(double* y, double alpha, std::size_t n);
  /// sum_i a[i]
  double (*sum)(const double* a, std::size_t n);
};

/// Kernels selected for this process.
const KernelTable& kernels();

/// Reference implementation, always available.
const KernelTable& scalar_kernels();

/// Every variant the running CPU can execute (scalar first).
std::vector<const KernelTable*> available_kernels();

inline double dot(const double* a, const double* b, std::size_t n) {
  return kernels().dot(a, b, n);
}
inline void axpy(double* y, double alpha, const double* x, std::size_t n) {
  kernels().axpy(y, alpha, x, n);
}
inline void scale(double* y, double alpha, std::size_t n) { kernels().scale(y, alpha, n); }
inline double sum(const double* a, std::size_t n) { return kernels().sum(a, n); }

}  // namespace nsbm::simd
