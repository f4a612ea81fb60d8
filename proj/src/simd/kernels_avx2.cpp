// AVX2 + FMA kernels. Functions carry a target attribute instead of compiling
// the whole file with -mavx2, so shared inline code stays baseline-ISA.

#include <immintrin.h>

#include "livechat/simd/kernels.hpp"
#include "scratch.hpp"

#define LC_AVX2 __attribute__((target("avx2,fma")))

namespace livechat::simd::detail {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using Reg = __m256;
  static constexpr std::size_t kWidth = 8;
  LC_AVX2 static Reg zero() { return _mm256_setzero_ps(); }
  LC_AVX2 static Reg set1(float v) { return _mm256_set1_ps(v); }
  LC_AVX2 static Reg load(const float* p) { return _mm256_loadu_ps(p); }
  LC_AVX2 static void store(float* p, Reg v) { _mm256_storeu_ps(p, v); }
  LC_AVX2 static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
  LC_AVX2 static Reg mul(Reg a, Reg b) { return _mm256_mul_ps(a, b); }
  LC_AVX2 static Reg fma(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
  LC_AVX2 static float hsum(Reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

template <>
struct Vec<double> {
  using Reg = __m256d;
  static constexpr std::size_t kWidth = 4;
  LC_AVX2 static Reg zero() { return _mm256_setzero_pd(); }
  LC_AVX2 static Reg set1(double v) { return _mm256_set1_pd(v); }
  LC_AVX2 static Reg load(const double* p) { return _mm256_loadu_pd(p); }
  LC_AVX2 static void store(double* p, Reg v) { _mm256_storeu_pd(p, v); }
  LC_AVX2 static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
  LC_AVX2 static Reg mul(Reg a, Reg b) { return _mm256_mul_pd(a, b); }
  LC_AVX2 static Reg fma(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
  LC_AVX2 static double hsum(Reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

// MR rows of C times two vector columns. acc[r][0..1] live in registers.
template <typename T, int MR>
LC_AVX2 void block_2v(std::size_t k, const T* a, std::size_t lda, const T* b,
                      std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  using V = Vec<T>;
  constexpr std::size_t W = V::kWidth;
  typename V::Reg acc0[MR];
  typename V::Reg acc1[MR];
  for (int r = 0; r < MR; ++r) {
    acc0[r] = V::zero();
    acc1[r] = V::zero();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const auto b0 = V::load(b + p * ldb);
    const auto b1 = V::load(b + p * ldb + W);
    for (int r = 0; r < MR; ++r) {
      const auto av = V::set1(a[r * lda + p]);
      acc0[r] = V::fma(av, b0, acc0[r]);
      acc1[r] = V::fma(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < MR; ++r) {
    T* row = c + r * ldc;
    if (accumulate) {
      acc0[r] = V::add(acc0[r], V::load(row));
      acc1[r] = V::add(acc1[r], V::load(row + W));
    }
    V::store(row, acc0[r]);
    V::store(row + W, acc1[r]);
  }
}

template <typename T, int MR>
LC_AVX2 void block_1v(std::size_t k, const T* a, std::size_t lda, const T* b,
                      std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  using V = Vec<T>;
  typename V::Reg acc[MR];
  for (int r = 0; r < MR; ++r) acc[r] = V::zero();
  for (std::size_t p = 0; p < k; ++p) {
    const auto b0 = V::load(b + p * ldb);
    for (int r = 0; r < MR; ++r) acc[r] = V::fma(V::set1(a[r * lda + p]), b0, acc[r]);
  }
  for (int r = 0; r < MR; ++r) {
    T* row = c + r * ldc;
    if (accumulate) acc[r] = V::add(acc[r], V::load(row));
    V::store(row, acc[r]);
  }
}

template <typename T, int MR>
LC_AVX2 void rows_nn(std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
                     std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  constexpr std::size_t W = Vec<T>::kWidth;
  std::size_t j = 0;
  for (; j + 2 * W <= n; j += 2 * W) block_2v<T, MR>(k, a, lda, b + j, ldb, c + j, ldc, accumulate);
  for (; j + W <= n; j += W) block_1v<T, MR>(k, a, lda, b + j, ldb, c + j, ldc, accumulate);
  for (; j < n; ++j) {
    for (int r = 0; r < MR; ++r) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[r * lda + p] * b[p * ldb + j];
      T& out = c[r * ldc + j];
      out = accumulate ? out + acc : acc;
    }
  }
}

template <typename T>
LC_AVX2 void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
                     const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) rows_nn<T, 4>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
  for (; i < m; ++i) rows_nn<T, 1>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
}

template <typename T>
LC_AVX2 T dot_avx2(const T* x, const T* y, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t W = V::kWidth;
  auto acc0 = V::zero();
  auto acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * W <= n; i += 2 * W) {
    acc0 = V::fma(V::load(x + i), V::load(y + i), acc0);
    acc1 = V::fma(V::load(x + i + W), V::load(y + i + W), acc1);
  }
  for (; i + W <= n; i += W) acc0 = V::fma(V::load(x + i), V::load(y + i), acc0);
  T acc = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

// A k-major operand (op(B) = B^T with a large n) would need packing anyway;
// a dot-product formulation avoids it when op(A) is untransposed.
template <typename T>
LC_AVX2 void gemm_nt_dot(std::size_t m, std::size_t n, std::size_t k, const T* a,
                         std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
                         bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const T v = dot_avx2<T>(a + i * lda, b + j * ldb, k);
      T& out = c[i * ldc + j];
      out = accumulate ? out + v : v;
    }
  }
}

template <typename T>
void gemm_avx2(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
               std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
               bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0;
    return;
  }
  if (ta == Trans::kNo && tb == Trans::kYes && k >= 2 * Vec<T>::kWidth && n < 2 * Vec<T>::kWidth) {
    gemm_nt_dot<T>(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    return;
  }
  std::size_t pa = 0;
  std::size_t pb = 0;
  const T* ap = pack<T>(0, ta, m, k, a, lda, &pa);
  const T* bp = pack<T>(1, tb, k, n, b, ldb, &pb);
  gemm_nn<T>(m, n, k, ap, pa, bp, pb, c, ldc, accumulate);
}

template <typename T>
LC_AVX2 void axpy_avx2(T alpha, const T* x, T* y, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t W = V::kWidth;
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) V::store(y + i, V::fma(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
LC_AVX2 void add_avx2(const T* x, T* y, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t W = V::kWidth;
  std::size_t i = 0;
  for (; i + W <= n; i += W) V::store(y + i, V::add(V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += x[i];
}

template <typename T>
LC_AVX2 void scale_avx2(T alpha, T* x, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t W = V::kWidth;
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) V::store(x + i, V::mul(av, V::load(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

template <typename T>
LC_AVX2 T sum_avx2(const T* x, std::size_t n) {
  using V = Vec<T>;
  constexpr std::size_t W = V::kWidth;
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + W <= n; i += W) acc = V::add(acc, V::load(x + i));
  T total = V::hsum(acc);
  for (; i < n; ++i) total += x[i];
  return total;
}

}  // namespace

template <typename T>
const KernelTable<T>& avx2_table() {
  static const KernelTable<T> table{&gemm_avx2<T>, &dot_avx2<T>,   &axpy_avx2<T>,
                                    &add_avx2<T>,  &scale_avx2<T>, &sum_avx2<T>};
  return table;
}

template const KernelTable<float>& avx2_table<float>();
template const KernelTable<double>& avx2_table<double>();

}  // namespace livechat::simd::detail
