#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <vector>

#include "humor/kernels.hpp"
#include "humor/rng.hpp"

using namespace humor::numcore::kernels;

namespace {

std::vector<double> random_matrix(int rows, int cols, humor::Rng& rng) {
  std::vector<double> m(static_cast<std::size_t>(rows) * cols);
  for (double& v : m) v = rng.uniform(-1.0, 1.0);
  return m;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Independent reference with a different loop nest (j outermost) so it does
// not share code with the kernels under test.
std::vector<double> naive_matmul(const std::vector<double>& a,
                                 const std::vector<double>& b, int m, int k,
                                 int n) {
  std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  return c;
}

}  // namespace

TEST_CASE("parallel matmul is bit-exact with the serial reference") {
  humor::Rng rng(11);
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 5, 7}, {17, 33, 9},
                         {64, 64, 64}, {130, 70, 50}}) {
    auto a = random_matrix(m, k, rng);
    auto b = random_matrix(k, n, rng);
    std::vector<double> cs(static_cast<std::size_t>(m) * n);
    std::vector<double> cp(static_cast<std::size_t>(m) * n);
    matmul_serial(a.data(), b.data(), cs.data(), m, k, n);
    matmul_parallel(a.data(), b.data(), cp.data(), m, k, n);
    CHECK(bit_equal(cs, cp));

    // accumulate=true as well
    std::vector<double> ds = cs, dp = cs;
    matmul_serial(a.data(), b.data(), ds.data(), m, k, n, true);
    matmul_parallel(a.data(), b.data(), dp.data(), m, k, n, true);
    CHECK(bit_equal(ds, dp));
  }
}

TEST_CASE("matmul agrees with an independent loop order") {
  humor::Rng rng(12);
  const int m = 13, k = 21, n = 8;
  auto a = random_matrix(m, k, rng);
  auto b = random_matrix(k, n, rng);
  std::vector<double> c(static_cast<std::size_t>(m) * n);
  matmul(a.data(), b.data(), c.data(), m, k, n);
  auto ref = naive_matmul(a, b, m, k, n);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("matmul identity") {
  humor::Rng rng(13);
  const int n = 6;
  std::vector<double> eye(n * n, 0.0);
  for (int i = 0; i < n; ++i) eye[i * n + i] = 1.0;
  auto a = random_matrix(n, n, rng);
  std::vector<double> c(static_cast<std::size_t>(n) * n);
  matmul(eye.data(), a.data(), c.data(), n, n, n);
  CHECK(bit_equal(c, a));
}

TEST_CASE("transposed variants: parallel bit-exact and correct") {
  humor::Rng rng(14);
  const int m = 19, k = 11, n = 23;
  auto a = random_matrix(m, k, rng);   // for bt: A(m,k), B(n,k)
  auto b = random_matrix(n, k, rng);
  std::vector<double> cs(static_cast<std::size_t>(m) * n), cp(cs.size());
  matmul_bt_serial(a.data(), b.data(), cs.data(), m, k, n);
  matmul_bt_parallel(a.data(), b.data(), cp.data(), m, k, n);
  CHECK(bit_equal(cs, cp));
  // reference: transpose b then plain matmul
  std::vector<double> bt(static_cast<std::size_t>(k) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) bt[j * n + i] = b[i * k + j];
  auto ref = naive_matmul(a, bt, m, k, n);
  for (std::size_t i = 0; i < cs.size(); ++i)
    CHECK(cs[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  auto a2 = random_matrix(k, m, rng);  // for at: A(k,m), B(k,n)
  auto b2 = random_matrix(k, n, rng);
  std::vector<double> es(static_cast<std::size_t>(m) * n), ep(es.size());
  matmul_at_serial(a2.data(), b2.data(), es.data(), m, k, n);
  matmul_at_parallel(a2.data(), b2.data(), ep.data(), m, k, n);
  CHECK(bit_equal(es, ep));
  std::vector<double> a2t(static_cast<std::size_t>(m) * k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < m; ++j) a2t[j * k + i] = a2[i * m + j];
  auto ref2 = naive_matmul(a2t, b2, m, k, n);
  for (std::size_t i = 0; i < es.size(); ++i)
    CHECK(es[i] == doctest::Approx(ref2[i]).epsilon(1e-12));
}

TEST_CASE("softmax and layer norm rows: parallel bit-exact with serial") {
  humor::Rng rng(15);
  const int rows = 300, cols = 64;
  auto x = random_matrix(rows, cols, rng);
  std::vector<double> ys(x.size()), yp(x.size());
  softmax_rows_serial(x.data(), ys.data(), rows, cols);
  softmax_rows_parallel(x.data(), yp.data(), rows, cols);
  CHECK(bit_equal(ys, yp));

  auto gain = random_matrix(1, cols, rng);
  auto bias = random_matrix(1, cols, rng);
  std::vector<double> ls(x.size()), lp(x.size());
  std::vector<double> xh_s(x.size()), xh_p(x.size());
  std::vector<double> inv_s(rows), inv_p(rows);
  layer_norm_rows_serial(x.data(), gain.data(), bias.data(), 1e-5, ls.data(),
                         xh_s.data(), inv_s.data(), rows, cols);
  layer_norm_rows_parallel(x.data(), gain.data(), bias.data(), 1e-5, lp.data(),
                           xh_p.data(), inv_p.data(), rows, cols);
  CHECK(bit_equal(ls, lp));
  CHECK(bit_equal(xh_s, xh_p));
  CHECK(bit_equal(inv_s, inv_p));
}

TEST_CASE("dispatching entry points match the serial reference on large sizes") {
  humor::Rng rng(16);
  const int m = 150, k = 80, n = 90;  // above the parallel threshold
  auto a = random_matrix(m, k, rng);
  auto b = random_matrix(k, n, rng);
  std::vector<double> c1(static_cast<std::size_t>(m) * n), c2(c1.size());
  matmul(a.data(), b.data(), c1.data(), m, k, n);
  matmul_serial(a.data(), b.data(), c2.data(), m, k, n);
  CHECK(bit_equal(c1, c2));
}
