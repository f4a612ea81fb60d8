#pragma once

// Dense arithmetic kernels used by the tensor library.
//
// Every kernel has a portable scalar reference implementation and, where the
// build and the host allow it, a vectorized variant (AVX2+FMA on x86-64, NEON
// on AArch64). The variant is picked once at startup from CPU feature flags and
// can be overridden with LIVECHAT_SIMD=scalar|avx2|neon or set_isa().
//
// All matrices are row-major with explicit leading dimensions.

#include <cstddef>
#include <string_view>

namespace livechat::simd {

enum class Isa { kScalar, kAvx2, kNeon };

enum class Trans { kNo, kYes };

std::string_view isa_name(Isa isa);

// True when the variant is compiled in and the CPU supports it.
bool isa_supported(Isa isa);

// Best supported variant, honoring LIVECHAT_SIMD when set.
Isa detect_isa();

Isa active_isa();

// Throws std::invalid_argument when the variant is unavailable.
void set_isa(Isa isa);

template <typename T>
struct KernelTable {
  // C = op(A) * op(B) (+ C when accumulate). op(A) is m x k, op(B) is k x n.
  void (*gemm)(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
               const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
               std::size_t ldc, bool accumulate);
  T (*dot)(const T* x, const T* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
  // y = x + y
  void (*add)(const T* x, T* y, std::size_t n);
  void (*scale)(T alpha, T* x, std::size_t n);
  T (*sum)(const T* x, std::size_t n);
};

template <typename T>
const KernelTable<T>& kernels_for(Isa isa);

// The table for the active variant.
template <typename T>
const KernelTable<T>& kernels();

template <typename T>
inline void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                 const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
                 std::size_t ldc, bool accumulate) {
  kernels<T>().gemm(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

template <typename T>
inline T dot(const T* x, const T* y, std::size_t n) {
  return kernels<T>().dot(x, y, n);
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, std::size_t n) {
  kernels<T>().axpy(alpha, x, y, n);
}

template <typename T>
inline void add(const T* x, T* y, std::size_t n) {
  kernels<T>().add(x, y, n);
}

template <typename T>
inline void scale(T alpha, T* x, std::size_t n) {
  kernels<T>().scale(alpha, x, n);
}

template <typename T>
inline T sum(const T* x, std::size_t n) {
  return kernels<T>().sum(x, n);
}

namespace detail {
// Per-variant tables, defined in the variant translation units.
template <typename T>
const KernelTable<T>& scalar_table();
#if defined(LIVECHAT_HAVE_AVX2)
template <typename T>
const KernelTable<T>& avx2_table();
#endif
#if defined(LIVECHAT_HAVE_NEON)
template <typename T>
const KernelTable<T>& neon_table();
#endif
}  // namespace detail

}  // namespace livechat::simd
