#pragma once

// Differentiable operations. Each op computes its result eagerly and, when a
// tape is active and some input requires grad, records its backward rule.
// Matrices are 2-D row-major tensors; "rows" ops treat every leading index as
// a row of the last dimension.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "livechat/common/rng.hpp"
#include "livechat/tensor/tensor.hpp"

namespace livechat::tensor {

using TokenId = std::int32_t;

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x[L x in] * weight[in x out] + bias[out]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// x[L x in] * weight[out x in]^T + bias[out] (tied output heads).
template <typename T>
Tensor<T> linear_transposed(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// Row r of x[L x d] gets table row r (or r % period when period is nonzero);
// table is [R x d] and must cover every row used.
template <typename T>
Tensor<T> add_positional(const Tensor<T>& x, const Tensor<T>& table, std::size_t period = 0);

template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5));

template <typename T>
Tensor<T> embedding_lookup(std::span<const TokenId> ids, const Tensor<T>& table);

// Selects rows of a matrix; gradients scatter back (summing repeats).
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows);

// Inverted dropout. Identity when rate is zero.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng);

inline constexpr TokenId kIgnoreId = -1;

// Mean negative log-likelihood over rows whose target is not ignore_id.
template <typename T>
Tensor<T> cross_entropy_masked(const Tensor<T>& logits, std::span<const TokenId> targets,
                               TokenId ignore_id = kIgnoreId);

// Which query/key pairs may interact.
struct AttentionMask {
  std::vector<std::uint8_t> key_valid;  // empty: every key valid
  bool causal = false;                  // key j visible to query i only when j <= i
  std::size_t block = 0;                // nonzero: query and key must share i / block

  bool allows(std::size_t query, std::size_t key) const {
    if (!key_valid.empty() && !key_valid[key]) return false;
    if (causal && key > query) return false;
    if (block != 0 && query / block != key / block) return false;
    return true;
  }
};

// Scaled dot-product attention over already projected q[Lq x d], k/v[Lk x d],
// split into n_heads column groups. Throws when some query has no visible key.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    const AttentionMask& mask, std::size_t n_heads);

// The attention distributions [n_heads][Lq][Lk] for inspection.
template <typename T>
std::vector<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, const AttentionMask& mask,
                                 std::size_t n_heads);

// Row-wise log-softmax, no gradient tracking.
template <typename T>
std::vector<T> log_softmax_rows(const Tensor<T>& logits);

}  // namespace livechat::tensor
