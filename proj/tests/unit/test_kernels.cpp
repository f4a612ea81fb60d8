#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "livechat/common/rng.hpp"
#include "livechat/simd/kernels.hpp"

using namespace livechat;
using simd::Isa;
using simd::Trans;

namespace {

template <typename T>
std::vector<T> random_vector(std::size_t n, Rng& rng) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform() * 2.0 - 1.0);
  return v;
}

template <typename T>
double tolerance() {
  return std::is_same_v<T, float> ? 1e-4 : 1e-12;
}

template <typename T>
double max_rel_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(1.0, std::abs(static_cast<double>(b[i])));
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])) / scale);
  }
  return worst;
}

std::vector<Isa> vector_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (simd::isa_supported(isa)) out.push_back(isa);
  }
  return out;
}

template <typename T>
void check_equivalence(Isa isa) {
  const auto& ref = simd::kernels_for<T>(Isa::kScalar);
  const auto& vec = simd::kernels_for<T>(isa);
  Rng rng(17);
  const std::size_t sizes[] = {1, 3, 7, 8, 9, 16, 31, 33, 64, 100};
  for (std::size_t m : {1, 5, 17}) {
    for (std::size_t n : sizes) {
      for (std::size_t k : {1, 4, 13, 40}) {
        for (Trans ta : {Trans::kNo, Trans::kYes}) {
          for (Trans tb : {Trans::kNo, Trans::kYes}) {
            for (bool acc : {false, true}) {
              const auto a = random_vector<T>(m * k, rng);
              const auto b = random_vector<T>(k * n, rng);
              const auto c0 = random_vector<T>(m * n, rng);
              const std::size_t lda = ta == Trans::kNo ? k : m;
              const std::size_t ldb = tb == Trans::kNo ? n : k;
              auto c_ref = c0, c_vec = c0;
              ref.gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, c_ref.data(), n, acc);
              vec.gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, c_vec.data(), n, acc);
              REQUIRE(max_rel_diff(c_vec, c_ref) <= tolerance<T>());
            }
          }
        }
      }
    }
  }
  for (std::size_t n : sizes) {
    const auto x = random_vector<T>(n, rng);
    const auto y0 = random_vector<T>(n, rng);
    CHECK(std::abs(static_cast<double>(vec.dot(x.data(), y0.data(), n) - ref.dot(x.data(), y0.data(), n))) <=
          tolerance<T>() * n);
    CHECK(std::abs(static_cast<double>(vec.sum(x.data(), n) - ref.sum(x.data(), n))) <= tolerance<T>() * n);
    auto y_ref = y0, y_vec = y0;
    ref.axpy(T(0.7), x.data(), y_ref.data(), n);
    vec.axpy(T(0.7), x.data(), y_vec.data(), n);
    CHECK(max_rel_diff(y_vec, y_ref) <= tolerance<T>());
    y_ref = y0;
    y_vec = y0;
    ref.add(x.data(), y_ref.data(), n);
    vec.add(x.data(), y_vec.data(), n);
    CHECK(max_rel_diff(y_vec, y_ref) <= tolerance<T>());
    y_ref = y0;
    y_vec = y0;
    ref.scale(T(-1.3), y_ref.data(), n);
    vec.scale(T(-1.3), y_vec.data(), n);
    CHECK(max_rel_diff(y_vec, y_ref) <= tolerance<T>());
  }
}

}  // namespace

TEST_CASE("scalar gemm matches a hand-computed product") {
  const std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8};
  std::vector<double> c(4, 0.0);
  simd::kernels_for<double>(Isa::kScalar).gemm(Trans::kNo, Trans::kNo, 2, 2, 2, a.data(), 2, b.data(), 2, c.data(), 2,
                                               false);
  CHECK(c == std::vector<double>{19, 22, 43, 50});
  simd::kernels_for<double>(Isa::kScalar).gemm(Trans::kYes, Trans::kNo, 2, 2, 2, a.data(), 2, b.data(), 2, c.data(),
                                               2, false);
  CHECK(c == std::vector<double>{26, 30, 38, 44});
}

TEST_CASE("vector kernels agree with the scalar reference") {
  const auto isas = vector_isas();
  if (isas.empty()) MESSAGE("no vector kernels on this host; only the scalar path is exercised");
  for (Isa isa : isas) {
    CAPTURE(simd::isa_name(isa));
    check_equivalence<float>(isa);
    check_equivalence<double>(isa);
  }
}

TEST_CASE("isa selection") {
  CHECK(simd::isa_supported(Isa::kScalar));
  const Isa before = simd::active_isa();
  simd::set_isa(Isa::kScalar);
  CHECK(simd::active_isa() == Isa::kScalar);
  simd::set_isa(before);
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (!simd::isa_supported(isa)) CHECK_THROWS_AS(simd::set_isa(isa), std::invalid_argument);
  }
}
