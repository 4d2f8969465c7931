#pragma once

#include <cstddef>
#include <functional>

namespace mhp {

/// Worker count used by the parallel kernels. 0 restores the hardware default.
/// Partitioning never changes per-element accumulation order, so results are
/// bit-identical for any thread count.
void set_num_threads(int n);
int num_threads();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries are
/// a pure function of (n, thread count).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

// C[m x n] = (or +=) A[m x k] * B[k x n], all row-major.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate);

// C[m x n] = (or +=) A^T * B with A[k x m], B[k x n]. Used for weight grads.
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate);

// Elementwise kernels shared by the graph forward pass and the plain
// inference path, so the two produce bit-identical values.
void vsigmoid(const double* x, double* y, std::size_t n);
void vtanh(const double* x, double* y, std::size_t n);
void vexp(const double* x, double* y, std::size_t n);
void vlog(const double* x, double* y, std::size_t n);
void vadd(const double* a, const double* b, double* y, std::size_t n);
void vsub(const double* a, const double* b, double* y, std::size_t n);
void vmul(const double* a, const double* b, double* y, std::size_t n);
void vscale(const double* a, double s, double* y, std::size_t n);
void add_row_vec(const double* m, const double* v, double* y, std::size_t rows,
                 std::size_t cols);

}  // namespace mhp
