#include "svae/kernels.hpp"

namespace svae::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

double ratio_sum_scalar(const double* num, const double* den, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += num[i] / den[i];
  return acc;
}

void complex_power_scalar(const std::complex<double>* c, double* out,
                          std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double re = c[i].real();
    const double im = c[i].imag();
    out[i] = re * re + im * im;
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{dot_scalar,       axpy_scalar,
                       sum_scalar,       mul_scalar,
                       ratio_sum_scalar, complex_power_scalar,
                       "scalar"};
  return ops;
}

}  // namespace svae::kernels
