#pragma once

#include <cstdint>

namespace humor::numcore::kernels {

// Dense float64 kernels behind the tensor ops. Each kernel comes in a
// serial and an OpenMP variant with an identical loop nest, so for every
// output element the summation order is the same and the two variants are
// bit-exact. The *_serial versions are the reference implementations used
// by the tests; the unsuffixed entry points dispatch to the OpenMP variant
// when the problem is large enough to amortize the fork.
//
// All matrices are row-major.

// C = A(m,k) * B(k,n). accumulate=true adds into C instead of overwriting.
void matmul_serial(const double* a, const double* b, double* c,
                   int m, int k, int n, bool accumulate = false);
void matmul_parallel(const double* a, const double* b, double* c,
                     int m, int k, int n, bool accumulate = false);
void matmul(const double* a, const double* b, double* c,
            int m, int k, int n, bool accumulate = false);

// C = A(m,k) * B(n,k)^T.
void matmul_bt_serial(const double* a, const double* b, double* c,
                      int m, int k, int n, bool accumulate = false);
void matmul_bt_parallel(const double* a, const double* b, double* c,
                        int m, int k, int n, bool accumulate = false);
void matmul_bt(const double* a, const double* b, double* c,
               int m, int k, int n, bool accumulate = false);

// C = A(k,m)^T * B(k,n).
void matmul_at_serial(const double* a, const double* b, double* c,
                      int m, int k, int n, bool accumulate = false);
void matmul_at_parallel(const double* a, const double* b, double* c,
                        int m, int k, int n, bool accumulate = false);
void matmul_at(const double* a, const double* b, double* c,
               int m, int k, int n, bool accumulate = false);

// Row-wise softmax with max subtraction: y[r] = softmax(x[r]).
void softmax_rows_serial(const double* x, double* y, int rows, int cols);
void softmax_rows_parallel(const double* x, double* y, int rows, int cols);
void softmax_rows(const double* x, double* y, int rows, int cols);

// Row-wise layer norm. Writes the normalized activations (xhat) and the
// per-row inverse standard deviation, both needed by the backward pass.
void layer_norm_rows_serial(const double* x, const double* gain,
                            const double* bias, double epsilon, double* y,
                            double* xhat, double* inv_std, int rows, int cols);
void layer_norm_rows_parallel(const double* x, const double* gain,
                              const double* bias, double epsilon, double* y,
                              double* xhat, double* inv_std, int rows, int cols);
void layer_norm_rows(const double* x, const double* gain, const double* bias,
                     double epsilon, double* y, double* xhat, double* inv_std,
                     int rows, int cols);

}  // namespace humor::numcore::kernels
