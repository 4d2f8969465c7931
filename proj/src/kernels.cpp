#include "mhp/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <thread>

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif
#include <vector>

namespace mhp {
namespace {

// Minimal persistent pool. parallel_for hands each worker one chunk and runs
// chunk 0 on the calling thread.
class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this, i] { run(i); });
    }
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int workers() const { return static_cast<int>(threads_.size()); }

  void dispatch(const std::function<void(int)>& job, int jobs) {
    {
      std::unique_lock<std::mutex> lk(mu_);
      job_ = &job;
      pending_ = jobs;
      ++generation_;
    }
    cv_.notify_all();
    job(0);  // caller takes slot 0
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ <= 1; });
    job_ = nullptr;
    pending_ = 0;
  }

 private:
  void run(int index) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* job = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        if (index + 1 >= pending_) continue;  // fewer jobs than workers
        job = job_;
      }
      (*job)(index + 1);
      std::unique_lock<std::mutex> lk(mu_);
      if (--pending_ <= 1) done_cv_.notify_all();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* job_ = nullptr;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

int g_threads = 0;

int resolve_threads() {
  if (g_threads > 0) return g_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

Pool& pool() {
  static Pool p(std::max(0, resolve_threads() - 1));
  return p;
}

// Work below this many output elements runs inline.
constexpr std::size_t kParallelCutoff = 16 * 1024;

}  // namespace

void set_num_threads(int n) { g_threads = n; }

int num_threads() { return resolve_threads(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  // The pool size is fixed at first use; lowering the thread count later still
  // takes effect here by dispatching fewer slots.
  const int avail = std::min(resolve_threads(), pool().workers() + 1);
  const int slots = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(avail)));
  if (slots <= 1) {
    fn(0, n);
    return;
  }
  const std::size_t chunk = (n + slots - 1) / slots;
  std::function<void(int)> job = [&](int s) {
    const std::size_t b = static_cast<std::size_t>(s) * chunk;
    if (b >= n) return;
    fn(b, std::min(n, b + chunk));
  };
  pool().dispatch(job, slots);
}

namespace {

// Canonical accumulation for one C element: a sequential FMA chain starting
// from the current value. The vector bodies and scalar tails below follow the
// same chain, so results are bit-identical regardless of vector width.
inline void axpy4(double* __restrict__ crow, std::size_t w, double a0, double a1, double a2,
                  double a3, const double* __restrict__ b0, const double* __restrict__ b1,
                  const double* __restrict__ b2, const double* __restrict__ b3) {
  std::size_t j = 0;
#if defined(__AVX512F__)
  const __m512d va0 = _mm512_set1_pd(a0), va1 = _mm512_set1_pd(a1);
  const __m512d va2 = _mm512_set1_pd(a2), va3 = _mm512_set1_pd(a3);
  for (; j + 8 <= w; j += 8) {
    __m512d cv = _mm512_loadu_pd(crow + j);
    cv = _mm512_fmadd_pd(va0, _mm512_loadu_pd(b0 + j), cv);
    cv = _mm512_fmadd_pd(va1, _mm512_loadu_pd(b1 + j), cv);
    cv = _mm512_fmadd_pd(va2, _mm512_loadu_pd(b2 + j), cv);
    cv = _mm512_fmadd_pd(va3, _mm512_loadu_pd(b3 + j), cv);
    _mm512_storeu_pd(crow + j, cv);
  }
#elif defined(__AVX2__) && defined(__FMA__)
  const __m256d va0 = _mm256_set1_pd(a0), va1 = _mm256_set1_pd(a1);
  const __m256d va2 = _mm256_set1_pd(a2), va3 = _mm256_set1_pd(a3);
  for (; j + 4 <= w; j += 4) {
    __m256d cv = _mm256_loadu_pd(crow + j);
    cv = _mm256_fmadd_pd(va0, _mm256_loadu_pd(b0 + j), cv);
    cv = _mm256_fmadd_pd(va1, _mm256_loadu_pd(b1 + j), cv);
    cv = _mm256_fmadd_pd(va2, _mm256_loadu_pd(b2 + j), cv);
    cv = _mm256_fmadd_pd(va3, _mm256_loadu_pd(b3 + j), cv);
    _mm256_storeu_pd(crow + j, cv);
  }
#endif
  for (; j < w; ++j) {
    double cv = crow[j];
    cv = std::fma(a0, b0[j], cv);
    cv = std::fma(a1, b1[j], cv);
    cv = std::fma(a2, b2[j], cv);
    cv = std::fma(a3, b3[j], cv);
    crow[j] = cv;
  }
}

inline void axpy1(double* __restrict__ crow, std::size_t w, double av,
                  const double* __restrict__ brow) {
  std::size_t j = 0;
#if defined(__AVX512F__)
  const __m512d va = _mm512_set1_pd(av);
  for (; j + 8 <= w; j += 8) {
    _mm512_storeu_pd(crow + j,
                     _mm512_fmadd_pd(va, _mm512_loadu_pd(brow + j), _mm512_loadu_pd(crow + j)));
  }
#elif defined(__AVX2__) && defined(__FMA__)
  const __m256d va = _mm256_set1_pd(av);
  for (; j + 4 <= w; j += 4) {
    _mm256_storeu_pd(crow + j,
                     _mm256_fmadd_pd(va, _mm256_loadu_pd(brow + j), _mm256_loadu_pd(crow + j)));
  }
#endif
  for (; j < w; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
}

}  // namespace

namespace {

// C tile [r0,r1) x [c0,c1) of C = A*B. The contraction dimension is unrolled
// by 4 so each C element store amortizes four fused multiply-adds; the
// remainder runs after the unrolled part, which keeps the per-element
// accumulation order a pure function of k (independent of tiling/threads).
void gemm_nn_tile(std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1,
                  std::size_t n, std::size_t k, const double* __restrict__ a,
                  const double* __restrict__ b, double* __restrict__ c, bool accumulate) {
  const std::size_t width = c1 - c0;
  if (!accumulate) {
    for (std::size_t i = r0; i < r1; ++i) {
      std::memset(c + i * n + c0, 0, width * sizeof(double));
    }
  }
  // j-tiles bound the live C block; large row blocks amortize each streamed
  // B strip across many rows (B re-reads are what hit DRAM). Tiling never
  // changes the per-element accumulation order over k.
  constexpr std::size_t kRowBlock = 64;
  constexpr std::size_t kColTile = 256;
  for (std::size_t jt = c0; jt < c1; jt += kColTile) {
    const std::size_t jw = std::min(kColTile, c1 - jt);
    for (std::size_t ib = r0; ib < r1; ib += kRowBlock) {
      const std::size_t ie = std::min(r1, ib + kRowBlock);
      std::size_t kk = 0;
      for (; kk + 4 <= k; kk += 4) {
        const double* __restrict__ b0 = b + (kk + 0) * n + jt;
        const double* __restrict__ b1 = b + (kk + 1) * n + jt;
        const double* __restrict__ b2 = b + (kk + 2) * n + jt;
        const double* __restrict__ b3 = b + (kk + 3) * n + jt;
        for (std::size_t i = ib; i < ie; ++i) {
          const double* arow = a + i * k + kk;
          const double a0 = arow[0], a1 = arow[1], a2 = arow[2], a3 = arow[3];
          axpy4(c + i * n + jt, jw, a0, a1, a2, a3, b0, b1, b2, b3);
        }
      }
      for (; kk < k; ++kk) {
        const double* __restrict__ brow = b + kk * n + jt;
        for (std::size_t i = ib; i < ie; ++i) {
          axpy1(c + i * n + jt, jw, a[i * k + kk], brow);
        }
      }
    }
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (m * n * k < kParallelCutoff) {
    gemm_nn_tile(0, m, 0, n, n, k, a, b, c, accumulate);
    return;
  }
  // Thin outputs split by columns, tall ones by rows; either way each element
  // is produced by exactly one thread with the same k-order.
  const std::size_t threads = static_cast<std::size_t>(num_threads());
  if (m >= 16 * threads || n < 2 * threads) {
    parallel_for(m, [&](std::size_t r0, std::size_t r1) {
      gemm_nn_tile(r0, r1, 0, n, n, k, a, b, c, accumulate);
    });
  } else {
    parallel_for(n, [&](std::size_t c0, std::size_t c1) {
      gemm_nn_tile(0, m, c0, c1, n, k, a, b, c, accumulate);
    });
  }
}

namespace {

// Row range [r0,r1) of C = A^T*B with A [k x m], B [k x n]: the contraction
// runs over A/B rows, unrolled by 4 as above.
void gemm_tn_rows(std::size_t r0, std::size_t r1, std::size_t m, std::size_t n,
                  std::size_t k, const double* __restrict__ a, const double* __restrict__ b,
                  double* __restrict__ c, bool accumulate) {
  if (!accumulate) {
    std::memset(c + r0 * n, 0, (r1 - r0) * n * sizeof(double));
  }
  constexpr std::size_t kRowBlock = 8;
  constexpr std::size_t kColTile = 256;
  for (std::size_t jt = 0; jt < n; jt += kColTile) {
    const std::size_t jw = std::min(kColTile, n - jt);
    for (std::size_t rb = r0; rb < r1; rb += kRowBlock) {
      const std::size_t re = std::min(r1, rb + kRowBlock);
      std::size_t i = 0;
      for (; i + 4 <= k; i += 4) {
        const double* __restrict__ b0 = b + (i + 0) * n + jt;
        const double* __restrict__ b1 = b + (i + 1) * n + jt;
        const double* __restrict__ b2 = b + (i + 2) * n + jt;
        const double* __restrict__ b3 = b + (i + 3) * n + jt;
        const double* a0 = a + (i + 0) * m;
        const double* a1 = a + (i + 1) * m;
        const double* a2 = a + (i + 2) * m;
        const double* a3 = a + (i + 3) * m;
        for (std::size_t r = rb; r < re; ++r) {
          axpy4(c + r * n + jt, jw, a0[r], a1[r], a2[r], a3[r], b0, b1, b2, b3);
        }
      }
      for (; i < k; ++i) {
        const double* __restrict__ brow = b + i * n + jt;
        const double* arow = a + i * m;
        for (std::size_t r = rb; r < re; ++r) {
          axpy1(c + r * n + jt, jw, arow[r], brow);
        }
      }
    }
  }
}

}  // namespace

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (m * n * k < kParallelCutoff) {
    gemm_tn_rows(0, m, m, n, k, a, b, c, accumulate);
    return;
  }
  parallel_for(m, [&](std::size_t r0, std::size_t r1) {
    gemm_tn_rows(r0, r1, m, n, k, a, b, c, accumulate);
  });
}

void vsigmoid(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void vtanh(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void vexp(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

void vlog(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::log(x[i]);
}

void vadd(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void vsub(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void vmul(const double* a, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void vscale(const double* a, double s, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * s;
}

void add_row_vec(const double* m, const double* v, double* y, std::size_t rows,
                 std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* mr = m + r * cols;
    double* yr = y + r * cols;
    for (std::size_t j = 0; j < cols; ++j) yr[j] = mr[j] + v[j];
  }
}

}  // namespace mhp
