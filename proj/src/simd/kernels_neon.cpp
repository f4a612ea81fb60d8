// NEON kernels for AArch64. GEMM is row-at-a-time axpy over packed operands.

#include <arm_neon.h>

#include "livechat/simd/kernels.hpp"
#include "scratch.hpp"

namespace livechat::simd::detail {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using Reg = float32x4_t;
  static constexpr std::size_t kWidth = 4;
  static Reg zero() { return vdupq_n_f32(0.0f); }
  static Reg set1(float v) { return vdupq_n_f32(v); }
  static Reg load(const float* p) { return vld1q_f32(p); }
  static void store(float* p, Reg v) { vst1q_f32(p, v); }
  static Reg add(Reg a, Reg b) { return vaddq_f32(a, b); }
  static Reg mul(Reg a, Reg b) { return vmulq_f32(a, b); }
  static Reg fma(Reg a, Reg b, Reg c) { return vfmaq_f32(c, a, b); }
  static float hsum(Reg v) { return vaddvq_f32(v); }
};

template <>
struct Vec<double> {
  using Reg = float64x2_t;
  static constexpr std::size_t kWidth = 2;
  static Reg zero() { return vdupq_n_f64(0.0); }
  static Reg set1(double v) { return vdupq_n_f64(v); }
  static Reg load(const double* p) { return vld1q_f64(p); }
  static void store(double* p, Reg v) { vst1q_f64(p, v); }
  static Reg add(Reg a, Reg b) { return vaddq_f64(a, b); }
  static Reg mul(Reg a, Reg b) { return vmulq_f64(a, b); }
  static Reg fma(Reg a, Reg b, Reg c) { return vfmaq_f64(c, a, b); }
  static double hsum(Reg v) { return vaddvq_f64(v); }
};

template <typename T>
T dot_neon(const T* x, const T* y, std::size_t n) {
  using V = Vec<T>;
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + V::kWidth <= n; i += V::kWidth) acc = V::fma(V::load(x + i), V::load(y + i), acc);
  T total = V::hsum(acc);
  for (; i < n; ++i) total += x[i] * y[i];
  return total;
}

template <typename T>
void axpy_neon(T alpha, const T* x, T* y, std::size_t n) {
  using V = Vec<T>;
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + V::kWidth <= n; i += V::kWidth) V::store(y + i, V::fma(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void add_neon(const T* x, T* y, std::size_t n) {
  using V = Vec<T>;
  std::size_t i = 0;
  for (; i + V::kWidth <= n; i += V::kWidth) V::store(y + i, V::add(V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += x[i];
}

template <typename T>
void scale_neon(T alpha, T* x, std::size_t n) {
  using V = Vec<T>;
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + V::kWidth <= n; i += V::kWidth) V::store(x + i, V::mul(av, V::load(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

template <typename T>
T sum_neon(const T* x, std::size_t n) {
  using V = Vec<T>;
  auto acc = V::zero();
  std::size_t i = 0;
  for (; i + V::kWidth <= n; i += V::kWidth) acc = V::add(acc, V::load(x + i));
  T total = V::hsum(acc);
  for (; i < n; ++i) total += x[i];
  return total;
}

template <typename T>
void gemm_neon(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const T* a,
               std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
               bool accumulate) {
  std::size_t pa = 0;
  std::size_t pb = 0;
  const T* ap = pack<T>(0, ta, m, k, a, lda, &pa);
  const T* bp = pack<T>(1, tb, k, n, b, ldb, &pb);
  for (std::size_t i = 0; i < m; ++i) {
    T* row = c + i * ldc;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) row[j] = 0;
    for (std::size_t p = 0; p < k; ++p) axpy_neon<T>(ap[i * pa + p], bp + p * pb, row, n);
  }
}

}  // namespace

template <typename T>
const KernelTable<T>& neon_table() {
  static const KernelTable<T> table{&gemm_neon<T>, &dot_neon<T>,   &axpy_neon<T>,
                                    &add_neon<T>,  &scale_neon<T>, &sum_neon<T>};
  return table;
}

template const KernelTable<float>& neon_table<float>();
template const KernelTable<double>& neon_table<double>();

}  // namespace livechat::simd::detail
