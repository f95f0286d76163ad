#include "dtfl/kernels.hpp"

#include <algorithm>
#include <stdexcept>

namespace dtfl::kernels {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < n; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

namespace {

// Below this many multiply-adds the OpenMP team costs more than it saves.
constexpr std::size_t kParallelThreshold = 1 << 14;

inline void forward_row(const double* x, const double* wt, const double* b, double* y, std::size_t in,
                        std::size_t out) {
  std::copy(b, b + out, y);
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* w = wt + i * out;
    for (std::size_t o = 0; o < out; ++o) y[o] += xi * w[o];
  }
}

inline void param_grad_row(const Matrix& x, const Matrix& dy, std::size_t i, double* dw) {
  const std::size_t out = dy.cols;
  std::fill(dw, dw + out, 0.0);
  for (std::size_t n = 0; n < x.rows; ++n) {
    const double xi = x(n, i);
    const double* g = dy.row(n);
    for (std::size_t o = 0; o < out; ++o) dw[o] += xi * g[o];
  }
}

}  // namespace

void dense_forward(const Matrix& x, std::span<const double> wt, std::span<const double> b, Matrix& y, Exec exec) {
  const std::size_t in = x.cols, out = b.size();
  if (wt.size() != in * out) throw std::invalid_argument("dense_forward: weight shape mismatch");
  if (y.rows != x.rows || y.cols != out) y.resize(x.rows, out);
  const auto rows = static_cast<std::ptrdiff_t>(x.rows);
  const bool par = exec == Exec::parallel && x.rows * in * out >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t n = 0; n < rows; ++n) forward_row(x.row(n), wt.data(), b.data(), y.row(n), in, out);
}

void dense_backward_params(const Matrix& x, const Matrix& dy, std::span<double> dwt, std::span<double> db, Exec exec) {
  const std::size_t in = x.cols, out = dy.cols;
  if (x.rows != dy.rows || dwt.size() != in * out || db.size() != out)
    throw std::invalid_argument("dense_backward_params: shape mismatch");
  const auto inputs = static_cast<std::ptrdiff_t>(in);
  const bool par = exec == Exec::parallel && x.rows * in * out >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < inputs; ++i) param_grad_row(x, dy, static_cast<std::size_t>(i), dwt.data() + i * out);
  std::fill(db.begin(), db.end(), 0.0);
  for (std::size_t n = 0; n < dy.rows; ++n) {
    const double* g = dy.row(n);
    for (std::size_t o = 0; o < out; ++o) db[o] += g[o];
  }
}

void dense_backward_input(const Matrix& dy, std::span<const double> wt, Matrix& dx, Exec exec) {
  const std::size_t out = dy.cols;
  if (out == 0 || wt.size() % out != 0) throw std::invalid_argument("dense_backward_input: shape mismatch");
  const std::size_t in = wt.size() / out;
  if (dx.rows != dy.rows || dx.cols != in) dx.resize(dy.rows, in);
  const auto rows = static_cast<std::ptrdiff_t>(dy.rows);
  const bool par = exec == Exec::parallel && dy.rows * in * out >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t n = 0; n < rows; ++n) {
    const double* g = dy.row(n);
    double* d = dx.row(n);
    for (std::size_t i = 0; i < in; ++i) d[i] = dot(g, wt.data() + i * out, out);
  }
}

namespace reference {

void dense_forward(const Matrix& x, std::span<const double> wt, std::span<const double> b, Matrix& y) {
  const std::size_t in = x.cols, out = b.size();
  y.resize(x.rows, out);
  for (std::size_t n = 0; n < x.rows; ++n)
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += x(n, i) * wt[i * out + o];
      y(n, o) = s;
    }
}

void dense_backward_params(const Matrix& x, const Matrix& dy, std::span<double> dwt, std::span<double> db) {
  const std::size_t in = x.cols, out = dy.cols;
  for (std::size_t i = 0; i < in; ++i)
    for (std::size_t o = 0; o < out; ++o) {
      double s = 0.0;
      for (std::size_t n = 0; n < x.rows; ++n) s += x(n, i) * dy(n, o);
      dwt[i * out + o] = s;
    }
  for (std::size_t o = 0; o < out; ++o) {
    double s = 0.0;
    for (std::size_t n = 0; n < dy.rows; ++n) s += dy(n, o);
    db[o] = s;
  }
}

void dense_backward_input(const Matrix& dy, std::span<const double> wt, Matrix& dx) {
  const std::size_t out = dy.cols, in = wt.size() / out;
  dx.resize(dy.rows, in);
  for (std::size_t n = 0; n < dy.rows; ++n)
    for (std::size_t i = 0; i < in; ++i) {
      double s = 0.0;
      for (std::size_t o = 0; o < out; ++o) s += dy(n, o) * wt[i * out + o];
      dx(n, i) = s;
    }
}

}  // namespace reference

}  // namespace dtfl::kernels
