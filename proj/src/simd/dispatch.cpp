#include <array>
#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "livechat/simd/kernels.hpp"
#include "scratch.hpp"

namespace livechat::simd {
namespace detail {

template <typename T>
T* scratch(int slot, std::size_t size) {
  thread_local std::array<std::vector<T>, 2> buffers;
  auto& buf = buffers.at(static_cast<std::size_t>(slot));
  if (buf.size() < size) buf.resize(size);
  return buf.data();
}

template float* scratch<float>(int, std::size_t);
template double* scratch<double>(int, std::size_t);

}  // namespace detail

namespace {

bool cpu_has_avx2() {
#if defined(LIVECHAT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool has = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return has;
#else
  return false;
#endif
}

template <typename T>
const KernelTable<T>& table_unchecked(Isa isa) {
  switch (isa) {
#if defined(LIVECHAT_HAVE_AVX2)
    case Isa::kAvx2:
      return detail::avx2_table<T>();
#endif
#if defined(LIVECHAT_HAVE_NEON)
    case Isa::kNeon:
      return detail::neon_table<T>();
#endif
    default:
      return detail::scalar_table<T>();
  }
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
      return cpu_has_avx2();
    case Isa::kNeon:
#if defined(LIVECHAT_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detect_isa() {
  if (const char* env = std::getenv("LIVECHAT_SIMD")) {
    const std::string want(env);
    for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
      if (want == isa_name(isa) && isa_supported(isa)) return isa;
    }
  }
  if (isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  if (isa_supported(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("SIMD variant not available: " + std::string(isa_name(isa)));
  }
  active().store(isa, std::memory_order_relaxed);
}

template <typename T>
const KernelTable<T>& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("SIMD variant not available: " + std::string(isa_name(isa)));
  }
  return table_unchecked<T>(isa);
}

template <typename T>
const KernelTable<T>& kernels() {
  return table_unchecked<T>(active_isa());
}

template const KernelTable<float>& kernels_for<float>(Isa);
template const KernelTable<double>& kernels_for<double>(Isa);
template const KernelTable<float>& kernels<float>();
template const KernelTable<double>& kernels<double>();

}  // namespace livechat::simd
