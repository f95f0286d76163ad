#include <doctest.h>

#include "dtfl/kernels.hpp"
#include "support.hpp"

using namespace dtfl;
using namespace dtfl::kernels;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.data) v = g(rng);
  return m;
}

void close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(testing::rel_err(a[k], b[k], 1e-9) < 1e-12);
}

}  // namespace

TEST_CASE("dot product handles every tail length") {
  for (std::size_t n = 0; n < 11; ++n) {
    std::vector<double> a(n), b(n);
    double ref = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = static_cast<double>(k + 1);
      b[k] = 0.5;
      ref += a[k] * b[k];
    }
    CHECK(dot(a.data(), b.data(), n) == ref);
  }
}

TEST_CASE("kernels: serial and parallel are bit identical and match the reference") {
  Rng rng(7);
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 2}, {32, 55, 64}, {64, 64, 45}, {17, 280, 7}};
  for (const auto& sh : shapes) {
    const std::size_t n = sh[0], in = sh[1], out = sh[2];
    const auto x = random_matrix(n, in, rng);
    const auto w = random_matrix(in, out, rng);
    const auto b = random_matrix(1, out, rng);
    const auto dy = random_matrix(n, out, rng);

    Matrix ys, yp, yr;
    dense_forward(x, w.data, b.data, ys, Exec::serial);
    dense_forward(x, w.data, b.data, yp, Exec::parallel);
    reference::dense_forward(x, w.data, b.data, yr);
    CHECK(ys.data == yp.data);
    close(ys.data, yr.data);

    std::vector<double> dws(in * out), dbs(out), dwp(in * out), dbp(out), dwr(in * out), dbr(out);
    dense_backward_params(x, dy, dws, dbs, Exec::serial);
    dense_backward_params(x, dy, dwp, dbp, Exec::parallel);
    reference::dense_backward_params(x, dy, dwr, dbr);
    CHECK(dws == dwp);
    CHECK(dbs == dbp);
    close(dws, dwr);
    close(dbs, dbr);

    Matrix dxs, dxp, dxr;
    dense_backward_input(dy, w.data, dxs, Exec::serial);
    dense_backward_input(dy, w.data, dxp, Exec::parallel);
    reference::dense_backward_input(dy, w.data, dxr);
    CHECK(dxs.data == dxp.data);
    close(dxs.data, dxr.data);
  }
}

TEST_CASE("kernels reject mismatched shapes") {
  Matrix x(2, 3), y;
  std::vector<double> w(5), b(2);
  CHECK_THROWS_AS(dense_forward(x, w, b, y), std::invalid_argument);
}
