#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dtfl/common.hpp"

namespace dtfl::kernels {

/// Row-major matrix; one sample per row.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Dense layer kernels. Weights are stored input-major: wt[i * out + o].
//
// Every output element is produced by the same sequence of floating-point
// operations in the serial and the OpenMP variant; the parallel loops only
// split independent rows, so results are bit-identical.

/// y[n][o] = b[o] + sum_i x[n][i] * wt[i][o]
void dense_forward(const Matrix& x, std::span<const double> wt, std::span<const double> b, Matrix& y,
                   Exec exec = Exec::serial);

/// dwt[i][o] = sum_n x[n][i] * dy[n][o];  db[o] = sum_n dy[n][o]. Overwrites.
void dense_backward_params(const Matrix& x, const Matrix& dy, std::span<double> dwt, std::span<double> db,
                           Exec exec = Exec::serial);

/// dx[n][i] = sum_o dy[n][o] * wt[i][o]
void dense_backward_input(const Matrix& dy, std::span<const double> wt, Matrix& dx, Exec exec = Exec::serial);

/// Fixed-order four-lane dot product shared by both variants.
double dot(const double* a, const double* b, std::size_t n);

/// Textbook triple loops with no blocking or threading. Summation order
/// differs from the kernels above, so agreement is to rounding only.
namespace reference {
void dense_forward(const Matrix& x, std::span<const double> wt, std::span<const double> b, Matrix& y);
void dense_backward_params(const Matrix& x, const Matrix& dy, std::span<double> dwt, std::span<double> db);
void dense_backward_input(const Matrix& dy, std::span<const double> wt, Matrix& dx);
}  // namespace reference

}  // namespace dtfl::kernels
