#pragma once

#include <complex>
#include <cstddef>

namespace svae::kernels {

// Arithmetic inner loops used by the dense-network and spectrogram code.
// Each entry has a scalar reference implementation and, on x86 with AVX2,
// a vectorized variant. The active table is chosen once at startup.
struct Ops {
  // sum_i a[i]*b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha*x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i a[i]
  double (*sum)(const double* a, std::size_t n);
  // out[i] = a[i]*b[i]
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // sum_i num[i]/den[i]
  double (*ratio_sum)(const double* num, const double* den, std::size_t n);
  // out[i] = |c[i]|^2
  void (*complex_power)(const std::complex<double>* c, double* out,
                        std::size_t n);
  const char* name;
};

const Ops& scalar_ops();
// nullptr when the CPU lacks AVX2.
const Ops* avx2_ops();
// Best table for this machine, selected on first use.
const Ops& active();

}  // namespace svae::kernels
