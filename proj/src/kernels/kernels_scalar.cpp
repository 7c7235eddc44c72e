#include <cmath>

#include "riskdiff/kernels.hpp"

namespace riskdiff::kernels::scalar {
namespace {

double exp_affine_sum(const double* a, const double* b, const double* c, std::size_t n, double u,
                      double v) {
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) acc += std::exp(a[j] + b[j] * u + c[j] * v);
  return acc;
}

void exp(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void expit(const double* eta, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::exp(-std::abs(eta[i]));
    const double r = 1.0 / (1.0 + e);
    out[i] = eta[i] >= 0.0 ? r : e * r;
  }
}

void gemv(const double* x, std::size_t n, std::size_t p, const double* beta, double* eta) {
  for (std::size_t i = 0; i < n; ++i) eta[i] = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    const double* col = x + j * n;
    for (std::size_t i = 0; i < n; ++i) eta[i] += col[i] * beta[j];
  }
}

void gemv_t(const double* x, std::size_t n, std::size_t p, const double* r, double* out) {
  for (std::size_t j = 0; j < p; ++j) {
    const double* col = x + j * n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += col[i] * r[i];
    out[j] = acc;
  }
}

void weighted_gram(const double* x, std::size_t n, std::size_t p, const double* w, double* g) {
  for (std::size_t j = 0; j < p; ++j) {
    const double* cj = x + j * n;
    for (std::size_t k = j; k < p; ++k) {
      const double* ck = x + k * n;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += cj[i] * ck[i] * w[i];
      g[j * p + k] = acc;
      g[k * p + j] = acc;
    }
  }
}

}  // namespace

const KernelTable kTable{SimdLevel::scalar, exp_affine_sum, exp, expit, gemv, gemv_t,
                         weighted_gram};

}  // namespace riskdiff::kernels::scalar
