#pragma once

#include <cstddef>
#include <vector>

#include "livechat/simd/kernels.hpp"

namespace livechat::simd::detail {

// Per-thread packing buffers for transposed GEMM operands. Compiled without
// ISA-specific target flags so the std::vector code is shared safely.
template <typename T>
T* scratch(int slot, std::size_t size);

// Copies op(src) into a dense rows x cols row-major buffer.
template <typename T>
const T* pack(int slot, Trans t, std::size_t rows, std::size_t cols, const T* src,
              std::size_t ld, std::size_t* packed_ld) {
  if (t == Trans::kNo) {
    *packed_ld = ld;
    return src;
  }
  T* dst = scratch<T>(slot, rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[r * cols + c] = src[c * ld + r];
  *packed_ld = cols;
  return dst;
}

}  // namespace livechat::simd::detail
