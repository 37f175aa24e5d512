#include "psfed/kernels.hpp"

namespace psfed::kern {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void relu_scalar(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] < 0.0) x[i] = 0.0;
}

void relu_backward_scalar(const double* y, double* g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (y[i] <= 0.0) g[i] = 0.0;
}

}  // namespace

const Ops scalar_ops = {dot_scalar, axpy_scalar, sum_scalar, relu_scalar,
                        relu_backward_scalar};

}  // namespace psfed::kern
