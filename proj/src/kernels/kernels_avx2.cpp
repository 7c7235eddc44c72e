// Compiled with -mavx2 -mfma; only reached through the dispatch table after
// a CPU feature check.

#include <immintrin.h>

#include <cmath>

#include "riskdiff/kernels.hpp"

namespace riskdiff::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// 2^n for integral-valued n in [-1022, 1023], built from exponent bits.
inline __m256d pow2(__m256d n) {
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 1.5 * 2^52
  const __m256i bits = _mm256_castpd_si256(_mm256_add_pd(n, magic));
  const __m256i ni = _mm256_sub_epi64(bits, _mm256_castpd_si256(magic));
  const __m256i biased = _mm256_add_epi64(ni, _mm256_set1_epi64x(1023));
  return _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
}

// Cephes-style exp: Cody-Waite range reduction and a (3,3) rational
// approximation on |r| <= ln2/2, then scaling by 2^n. The scale is applied in
// two halves so results in the subnormal range are still produced.
inline __m256d exp256(__m256d x) {
  const __m256d hi_limit = _mm256_set1_pd(709.782712893384);
  const __m256d lo_limit = _mm256_set1_pd(-745.1332191019412);
  const __m256d over = _mm256_cmp_pd(x, hi_limit, _CMP_GT_OQ);
  const __m256d under = _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ);
  const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo_limit), hi_limit);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125E-1), xc);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212E-6), r);

  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d p = _mm256_set1_pd(1.26177193074810590878E-4);
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(3.02994407707441961300E-2));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(9.99999999999999999910E-1));
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_set1_pd(3.00198505138664455042E-6);
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.52448340349684104192E-3));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.27265548208155028766E-1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.00000000000000000009E0));
  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  const __m256d n1 = _mm256_floor_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.5)));
  const __m256d n2 = _mm256_sub_pd(n, n1);
  e = _mm256_mul_pd(_mm256_mul_pd(e, pow2(n1)), pow2(n2));

  e = _mm256_blendv_pd(e, _mm256_set1_pd(HUGE_VAL), over);
  e = _mm256_blendv_pd(e, _mm256_setzero_pd(), under);
  return e;
}

double exp_affine_sum(const double* a, const double* b, const double* c, std::size_t n, double u,
                      double v) {
  const __m256d vu = _mm256_set1_pd(u);
  const __m256d vv = _mm256_set1_pd(v);
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d t = _mm256_fmadd_pd(_mm256_loadu_pd(b + j), vu, _mm256_loadu_pd(a + j));
    t = _mm256_fmadd_pd(_mm256_loadu_pd(c + j), vv, t);
    acc = _mm256_add_pd(acc, exp256(t));
  }
  double tail = 0.0;
  for (; j < n; ++j) tail += std::exp(a[j] + b[j] * u + c[j] * v);
  return hsum(acc) + tail;
}

void exp(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp256(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = std::exp(x[i]);
}

void expit(const double* eta, double* out, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d u = _mm256_loadu_pd(eta + i);
    const __m256d neg_abs = _mm256_or_pd(u, sign_mask);
    const __m256d e = exp256(neg_abs);
    const __m256d r = _mm256_div_pd(one, _mm256_add_pd(one, e));
    const __m256d nonneg = _mm256_cmp_pd(u, _mm256_setzero_pd(), _CMP_GE_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(_mm256_mul_pd(e, r), r, nonneg));
  }
  for (; i < n; ++i) {
    const double e = std::exp(-std::abs(eta[i]));
    const double r = 1.0 / (1.0 + e);
    out[i] = eta[i] >= 0.0 ? r : e * r;
  }
}

void gemv(const double* x, std::size_t n, std::size_t p, const double* beta, double* eta) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < p; ++j)
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + j * n + i), _mm256_set1_pd(beta[j]), acc);
    _mm256_storeu_pd(eta + i, acc);
  }
  for (; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < p; ++j) acc += x[j * n + i] * beta[j];
    eta[i] = acc;
  }
}

void gemv_t(const double* x, std::size_t n, std::size_t p, const double* r, double* out) {
  for (std::size_t j = 0; j < p; ++j) {
    const double* col = x + j * n;
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(col + i), _mm256_loadu_pd(r + i), acc);
    double tail = 0.0;
    for (; i < n; ++i) tail += col[i] * r[i];
    out[j] = hsum(acc) + tail;
  }
}

void weighted_gram(const double* x, std::size_t n, std::size_t p, const double* w, double* g) {
  for (std::size_t j = 0; j < p; ++j) {
    const double* cj = x + j * n;
    for (std::size_t k = j; k < p; ++k) {
      const double* ck = x + k * n;
      __m256d acc = _mm256_setzero_pd();
      std::size_t i = 0;
      for (; i + 4 <= n; i += 4) {
        const __m256d wx = _mm256_mul_pd(_mm256_loadu_pd(cj + i), _mm256_loadu_pd(w + i));
        acc = _mm256_fmadd_pd(wx, _mm256_loadu_pd(ck + i), acc);
      }
      double tail = 0.0;
      for (; i < n; ++i) tail += cj[i] * ck[i] * w[i];
      const double v = hsum(acc) + tail;
      g[j * p + k] = v;
      g[k * p + j] = v;
    }
  }
}

}  // namespace

const KernelTable kTable{SimdLevel::avx2, exp_affine_sum, exp, expit, gemv, gemv_t,
                         weighted_gram};

}  // namespace riskdiff::kernels::avx2
