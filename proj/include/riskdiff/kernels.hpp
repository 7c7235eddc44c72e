#pragma once

// Data-parallel inner loops shared by the exact test and the logistic fitter.
//
// Every kernel has a scalar reference implementation; on x86-64 an AVX2/FMA
// variant is compiled into a separate translation unit and selected at
// runtime when the CPU supports it. The two variants agree to rounding (the
// vector versions reassociate sums and use FMA), which the kernel tests
// check directly.
//
// Matrices are column-major: element (i, j) of an n x p matrix lives at
// x[j * n + i].

#include <cstddef>
#include <span>
#include <string_view>

namespace riskdiff::kernels {

enum class SimdLevel { scalar, avx2 };

std::string_view to_string(SimdLevel level);

struct KernelTable {
  SimdLevel level;
  // sum_j exp(a[j] + b[j] * u + c[j] * v)
  double (*exp_affine_sum)(const double* a, const double* b, const double* c, std::size_t n,
                           double u, double v);
  // out[i] = exp(x[i])
  void (*exp)(const double* x, double* out, std::size_t n);
  // out[i] = 1 / (1 + exp(-eta[i]))
  void (*expit)(const double* eta, double* out, std::size_t n);
  // eta = X beta
  void (*gemv)(const double* x, std::size_t n, std::size_t p, const double* beta, double* eta);
  // out = X^T r
  void (*gemv_t)(const double* x, std::size_t n, std::size_t p, const double* r, double* out);
  // g = X^T diag(w) X, p x p row-major, both triangles filled
  void (*weighted_gram)(const double* x, std::size_t n, std::size_t p, const double* w,
                        double* g);
};

bool supported(SimdLevel level);

/// The table for a specific level; throws DomainError if the CPU (or the
/// build) lacks it.
const KernelTable& table(SimdLevel level);

/// The table used by the library. Defaults to the best supported level; the
/// RISKDIFF_SIMD environment variable ("scalar" or "avx2") overrides it.
const KernelTable& active();

/// Process-wide override, intended for tests and the CLI. Not synchronized
/// with concurrent kernel users; call before starting work.
void set_active(SimdLevel level);

namespace scalar {
extern const KernelTable kTable;
}
#if RISKDIFF_HAVE_AVX2
namespace avx2 {
extern const KernelTable kTable;
}
#endif

// Span conveniences over the active table.

inline double exp_affine_sum(std::span<const double> a, std::span<const double> b,
                             std::span<const double> c, double u, double v) {
  return active().exp_affine_sum(a.data(), b.data(), c.data(), a.size(), u, v);
}

inline void expit(std::span<const double> eta, std::span<double> out) {
  active().expit(eta.data(), out.data(), eta.size());
}

}  // namespace riskdiff::kernels
