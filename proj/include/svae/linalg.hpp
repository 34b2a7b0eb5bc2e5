#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "svae/kernels.hpp"

namespace svae {

using Vector = std::vector<double>;

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) {
    return data[i * cols + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
};

// y = W x + b
inline void matvec(const Matrix& w, const Vector& x, const Vector& b,
                   Vector& y) {
  if (x.size() != w.cols || b.size() != w.rows)
    throw std::invalid_argument("matvec: shape mismatch");
  y.resize(w.rows);
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < w.rows; ++i)
    y[i] = k.dot(w.row(i), x.data(), w.cols) + b[i];
}

// x_grad += W^T u
inline void matvec_transpose_acc(const Matrix& w, const Vector& u,
                                 Vector& x_grad) {
  if (u.size() != w.rows || x_grad.size() != w.cols)
    throw std::invalid_argument("matvec_transpose_acc: shape mismatch");
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < w.rows; ++i)
    k.axpy(u[i], w.row(i), x_grad.data(), w.cols);
}

// dW += u x^T
inline void outer_acc(const Vector& u, const Vector& x, Matrix& dw) {
  if (u.size() != dw.rows || x.size() != dw.cols)
    throw std::invalid_argument("outer_acc: shape mismatch");
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < dw.rows; ++i)
    k.axpy(u[i], x.data(), dw.row(i), dw.cols);
}

}  // namespace svae
