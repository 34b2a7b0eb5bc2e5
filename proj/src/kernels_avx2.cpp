// AVX2 variants of the arithmetic kernels. Compiled with -mavx2 -mfma;
// only reached through the runtime dispatch in kernels_dispatch.cpp.

#include "svae/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define SVAE_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#else
#define SVAE_HAVE_AVX2_BUILD 0
#endif

namespace svae::kernels {

#if SVAE_HAVE_AVX2_BUILD
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

double ratio_sum_avx2(const double* num, const double* den, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_div_pd(_mm256_loadu_pd(num + i),
                                           _mm256_loadu_pd(den + i)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += num[i] / den[i];
  return s;
}

void complex_power_avx2(const std::complex<double>* c, double* out,
                        std::size_t n) {
  // interleaved (re, im) pairs; two loads give four complex values
  const double* p = reinterpret_cast<const double*>(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d lo = _mm256_loadu_pd(p + 2 * i);      // r0 i0 r1 i1
    __m256d hi = _mm256_loadu_pd(p + 2 * i + 4);  // r2 i2 r3 i3
    __m256d sqlo = _mm256_mul_pd(lo, lo);
    __m256d sqhi = _mm256_mul_pd(hi, hi);
    __m256d sums = _mm256_hadd_pd(sqlo, sqhi);  // |0|^2 |2|^2 |1|^2 |3|^2
    _mm256_storeu_pd(out + i, _mm256_permute4x64_pd(sums, 0xD8));
  }
  for (; i < n; ++i) {
    const double re = c[i].real();
    const double im = c[i].imag();
    out[i] = re * re + im * im;
  }
}

const Ops avx2_table{dot_avx2,       axpy_avx2,
                     sum_avx2,       mul_avx2,
                     ratio_sum_avx2, complex_power_avx2,
                     "avx2"};

}  // namespace

const Ops* avx2_ops_impl() { return &avx2_table; }

#else

const Ops* avx2_ops_impl() { return nullptr; }

#endif

}  // namespace svae::kernels
