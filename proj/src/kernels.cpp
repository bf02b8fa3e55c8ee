#include "humor/kernels.hpp"

#include <cmath>
#include <cstring>

namespace humor::numcore::kernels {

namespace {

// Below these sizes the OpenMP fork costs more than it saves.
constexpr std::int64_t kMatmulParallelThreshold = 1 << 16;   // m*k*n flops
constexpr std::int64_t kRowOpParallelThreshold = 1 << 14;    // rows*cols elems

inline void matmul_row_range(const double* a, const double* b, double* c,
                             int k, int n, int i0, int i1, bool accumulate) {
  for (int i = i0; i < i1; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(ci, 0, sizeof(double) * static_cast<std::size_t>(n));
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

inline void matmul_bt_row_range(const double* a, const double* b, double* c,
                                int k, int n, int i0, int i1, bool accumulate) {
  for (int i = i0; i < i1; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = accumulate ? ci[j] + acc : acc;
    }
  }
}

inline void matmul_at_row_range(const double* a, const double* b, double* c,
                                int m, int k, int n, int i0, int i1,
                                bool accumulate) {
  for (int i = i0; i < i1; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::memset(ci, 0, sizeof(double) * static_cast<std::size_t>(n));
    for (int p = 0; p < k; ++p) {
      const double api = a[static_cast<std::size_t>(p) * m + i];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

inline void softmax_row(const double* x, double* y, int cols) {
  double mx = x[0];
  for (int j = 1; j < cols; ++j) mx = x[j] > mx ? x[j] : mx;
  double sum = 0.0;
  for (int j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < cols; ++j) y[j] *= inv;
}

inline void layer_norm_row(const double* x, const double* gain,
                           const double* bias, double epsilon, double* y,
                           double* xhat, double* inv_std_out, int cols) {
  double mean = 0.0;
  for (int j = 0; j < cols; ++j) mean += x[j];
  mean /= cols;
  double var = 0.0;
  for (int j = 0; j < cols; ++j) {
    const double d = x[j] - mean;
    var += d * d;
  }
  var /= cols;
  const double inv_std = 1.0 / std::sqrt(var + epsilon);
  *inv_std_out = inv_std;
  for (int j = 0; j < cols; ++j) {
    xhat[j] = (x[j] - mean) * inv_std;
    y[j] = gain[j] * xhat[j] + bias[j];
  }
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* c, int m, int k,
                   int n, bool accumulate) {
  matmul_row_range(a, b, c, k, n, 0, m, accumulate);
}

void matmul_parallel(const double* a, const double* b, double* c, int m, int k,
                     int n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) matmul_row_range(a, b, c, k, n, i, i + 1, accumulate);
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n,
            bool accumulate) {
  const std::int64_t work = static_cast<std::int64_t>(m) * k * n;
  if (work >= kMatmulParallelThreshold) {
    matmul_parallel(a, b, c, m, k, n, accumulate);
  } else {
    matmul_serial(a, b, c, m, k, n, accumulate);
  }
}

void matmul_bt_serial(const double* a, const double* b, double* c, int m,
                      int k, int n, bool accumulate) {
  matmul_bt_row_range(a, b, c, k, n, 0, m, accumulate);
}

void matmul_bt_parallel(const double* a, const double* b, double* c, int m,
                        int k, int n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) matmul_bt_row_range(a, b, c, k, n, i, i + 1, accumulate);
}

void matmul_bt(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate) {
  const std::int64_t work = static_cast<std::int64_t>(m) * k * n;
  if (work >= kMatmulParallelThreshold) {
    matmul_bt_parallel(a, b, c, m, k, n, accumulate);
  } else {
    matmul_bt_serial(a, b, c, m, k, n, accumulate);
  }
}

void matmul_at_serial(const double* a, const double* b, double* c, int m,
                      int k, int n, bool accumulate) {
  matmul_at_row_range(a, b, c, m, k, n, 0, m, accumulate);
}

void matmul_at_parallel(const double* a, const double* b, double* c, int m,
                        int k, int n, bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) matmul_at_row_range(a, b, c, m, k, n, i, i + 1, accumulate);
}

void matmul_at(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate) {
  const std::int64_t work = static_cast<std::int64_t>(m) * k * n;
  if (work >= kMatmulParallelThreshold) {
    matmul_at_parallel(a, b, c, m, k, n, accumulate);
  } else {
    matmul_at_serial(a, b, c, m, k, n, accumulate);
  }
}

void softmax_rows_serial(const double* x, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    softmax_row(x + static_cast<std::size_t>(r) * cols,
                y + static_cast<std::size_t>(r) * cols, cols);
}

void softmax_rows_parallel(const double* x, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r)
    softmax_row(x + static_cast<std::size_t>(r) * cols,
                y + static_cast<std::size_t>(r) * cols, cols);
}

void softmax_rows(const double* x, double* y, int rows, int cols) {
  if (static_cast<std::int64_t>(rows) * cols >= kRowOpParallelThreshold) {
    softmax_rows_parallel(x, y, rows, cols);
  } else {
    softmax_rows_serial(x, y, rows, cols);
  }
}

void layer_norm_rows_serial(const double* x, const double* gain,
                            const double* bias, double epsilon, double* y,
                            double* xhat, double* inv_std, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    layer_norm_row(x + off, gain, bias, epsilon, y + off, xhat + off,
                   inv_std + r, cols);
  }
}

void layer_norm_rows_parallel(const double* x, const double* gain,
                              const double* bias, double epsilon, double* y,
                              double* xhat, double* inv_std, int rows,
                              int cols) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    layer_norm_row(x + off, gain, bias, epsilon, y + off, xhat + off,
                   inv_std + r, cols);
  }
}

void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double epsilon, double* y, double* xhat, double* inv_std,
                     int rows, int cols) {
  if (static_cast<std::int64_t>(rows) * cols >= kRowOpParallelThreshold) {
    layer_norm_rows_parallel(x, gain, bias, epsilon, y, xhat, inv_std, rows, cols);
  } else {
    layer_norm_rows_serial(x, gain, bias, epsilon, y, xhat, inv_std, rows, cols);
  }
}

}  // namespace humor::numcore::kernels
