#include "livechat/tensor/ops.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "livechat/simd/kernels.hpp"
#include "livechat/tensor/tape.hpp"

namespace livechat::tensor {
namespace {

using simd::Trans;

template <typename T>
Tape<T>* tape_for(std::initializer_list<const Tensor<T>*> inputs) {
  Tape<T>* tape = active_tape<T>();
  if (tape == nullptr) return nullptr;
  for (const Tensor<T>* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op, const char* name) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": " + name + " must be a matrix, got " +
                     shape_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul", "lhs");
  require_matrix(b, "matmul", "rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ for " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor<T> out = Tensor<T>::zeros({m, n});
  simd::gemm<T>(Trans::kNo, Trans::kNo, m, n, k, a.ptr(), k, b.ptr(), n, out.mutable_ptr(), n, false);
  if (Tape<T>* tape = tape_for<T>({&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out, m, n, k]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (a.requires_grad())
        simd::gemm<T>(Trans::kNo, Trans::kYes, m, k, n, g, n, b.ptr(), n, a.grad_ptr(), k, true);
      if (b.requires_grad())
        simd::gemm<T>(Trans::kYes, Trans::kNo, k, n, m, a.ptr(), k, g, n, b.grad_ptr(), n, true);
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_matrix(x, "linear", "input");
  require_matrix(weight, "linear", "weight");
  const std::size_t rows = x.dim(0), in = x.dim(1), out_dim = weight.dim(1);
  if (weight.dim(0) != in || bias.numel() != out_dim) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + ", weight " +
                     shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
  }
  std::vector<T> values(rows * out_dim);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(bias.data().begin(), bias.data().end(), values.begin() + r * out_dim);
  Tensor<T> out({rows, out_dim}, std::move(values));
  simd::gemm<T>(Trans::kNo, Trans::kNo, rows, out_dim, in, x.ptr(), in, weight.ptr(), out_dim,
                out.mutable_ptr(), out_dim, true);
  if (Tape<T>* tape = tape_for<T>({&x, &weight, &bias})) {
    out.set_requires_grad(true);
    tape->record([x, weight, bias, out, rows, in, out_dim]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (x.requires_grad())
        simd::gemm<T>(Trans::kNo, Trans::kYes, rows, in, out_dim, g, out_dim, weight.ptr(), out_dim,
                      x.grad_ptr(), in, true);
      if (weight.requires_grad())
        simd::gemm<T>(Trans::kYes, Trans::kNo, in, out_dim, rows, x.ptr(), in, g, out_dim,
                      weight.grad_ptr(), out_dim, true);
      if (bias.requires_grad()) {
        T* gb = bias.grad_ptr();
        for (std::size_t r = 0; r < rows; ++r) simd::add<T>(g + r * out_dim, gb, out_dim);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear_transposed(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_matrix(x, "linear_transposed", "input");
  require_matrix(weight, "linear_transposed", "weight");
  const std::size_t rows = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in || bias.numel() != out_dim) {
    throw ShapeError("linear_transposed: input " + shape_string(x.shape()) + ", weight " +
                     shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
  }
  std::vector<T> values(rows * out_dim);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(bias.data().begin(), bias.data().end(), values.begin() + r * out_dim);
  Tensor<T> out({rows, out_dim}, std::move(values));
  simd::gemm<T>(Trans::kNo, Trans::kYes, rows, out_dim, in, x.ptr(), in, weight.ptr(), in,
                out.mutable_ptr(), out_dim, true);
  if (Tape<T>* tape = tape_for<T>({&x, &weight, &bias})) {
    out.set_requires_grad(true);
    tape->record([x, weight, bias, out, rows, in, out_dim]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (x.requires_grad())
        simd::gemm<T>(Trans::kNo, Trans::kNo, rows, in, out_dim, g, out_dim, weight.ptr(), in,
                      x.grad_ptr(), in, true);
      if (weight.requires_grad())
        simd::gemm<T>(Trans::kYes, Trans::kNo, out_dim, in, rows, g, out_dim, x.ptr(), in,
                      weight.grad_ptr(), in, true);
      if (bias.requires_grad()) {
        T* gb = bias.grad_ptr();
        for (std::size_t r = 0; r < rows; ++r) simd::add<T>(g + r * out_dim, gb, out_dim);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> values(a.data().begin(), a.data().end());
  simd::add<T>(b.ptr(), values.data(), values.size());
  Tensor<T> out(a.shape(), std::move(values));
  if (Tape<T>* tape = tape_for<T>({&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out]() mutable {
      if (!out.has_grad()) return;
      const std::size_t n = out.numel();
      if (a.requires_grad()) simd::add<T>(out.grad().data(), a.grad_ptr(), n);
      if (b.requires_grad()) simd::add<T>(out.grad().data(), b.grad_ptr(), n);
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  const std::size_t n = a.numel();
  std::vector<T> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a.data()[i] * b.data()[i];
  Tensor<T> out(a.shape(), std::move(values));
  if (Tape<T>* tape = tape_for<T>({&a, &b})) {
    out.set_requires_grad(true);
    tape->record([a, b, out, n]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      // Read both operands before writing: a and b may alias.
      std::vector<T> ga(n), gb(n);
      for (std::size_t i = 0; i < n; ++i) {
        ga[i] = g[i] * b.data()[i];
        gb[i] = g[i] * a.data()[i];
      }
      if (a.requires_grad()) simd::add<T>(ga.data(), a.grad_ptr(), n);
      if (b.requires_grad()) simd::add<T>(gb.data(), b.grad_ptr(), n);
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> values(x.data().begin(), x.data().end());
  simd::scale<T>(factor, values.data(), values.size());
  Tensor<T> out(x.shape(), std::move(values));
  if (Tape<T>* tape = tape_for<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, factor]() mutable {
      if (!out.has_grad()) return;
      simd::axpy<T>(factor, out.grad().data(), x.grad_ptr(), x.numel());
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::scalar(simd::sum<T>(x.ptr(), x.numel()));
  if (Tape<T>* tape = tape_for<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      for (T& v : x.mutable_grad()) v += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_positional(const Tensor<T>& x, const Tensor<T>& table, std::size_t period) {
  require_matrix(x, "add_positional", "input");
  require_matrix(table, "add_positional", "table");
  const std::size_t len = x.dim(0), d = x.dim(1);
  const std::size_t span = period == 0 ? len : period;
  if (table.dim(1) != d || table.dim(0) < std::min(span, len)) {
    throw ShapeError("add_positional: input " + shape_string(x.shape()) + " exceeds table " +
                     shape_string(table.shape()));
  }
  std::vector<T> values(x.data().begin(), x.data().end());
  for (std::size_t r = 0; r < len; ++r) simd::add<T>(table.ptr() + (r % span) * d, values.data() + r * d, d);
  Tensor<T> out(x.shape(), std::move(values));
  if (Tape<T>* tape = tape_for<T>({&x, &table})) {
    out.set_requires_grad(true);
    tape->record([x, table, out, len, d, span]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (x.requires_grad()) simd::add<T>(g, x.grad_ptr(), len * d);
      if (table.requires_grad()) {
        T* gt = table.grad_ptr();
        for (std::size_t r = 0; r < len; ++r) simd::add<T>(g + r * d, gt + (r % span) * d, d);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2 / pi)
  constexpr T kA = T(0.044715);
  const std::size_t n = x.numel();
  std::vector<T> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x.data()[i];
    values[i] = T(0.5) * v * (T(1) + std::tanh(kC * (v + kA * v * v * v)));
  }
  Tensor<T> out(x.shape(), std::move(values));
  if (Tape<T>* tape = tape_for<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, n]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const T v = x.data()[i];
        const T th = std::tanh(kC * (v + kA * v * v * v));
        const T dth = (T(1) - th * th) * kC * (T(1) + T(3) * kA * v * v);
        gx[i] += g[i] * (T(0.5) * (T(1) + th) + T(0.5) * v * dth);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                     shape_string(x.shape()));
  }
  const std::size_t extent = x.dim(axis);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  std::vector<T> values(x.numel());
  const auto in = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < inner; ++s) {
      const std::size_t base = o * extent * inner + s;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t e = 0; e < extent; ++e) mx = std::max(mx, in[base + e * inner]);
      T total = 0;
      for (std::size_t e = 0; e < extent; ++e) {
        const T v = std::exp(in[base + e * inner] - mx);
        values[base + e * inner] = v;
        total += v;
      }
      for (std::size_t e = 0; e < extent; ++e) values[base + e * inner] /= total;
    }
  }
  Tensor<T> out(x.shape(), std::move(values));
  if (Tape<T>* tape = tape_for<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, outer, inner, extent]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      const auto y = out.data();
      auto gx = x.mutable_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t s = 0; s < inner; ++s) {
          const std::size_t base = o * extent * inner + s;
          T dotp = 0;
          for (std::size_t e = 0; e < extent; ++e) dotp += g[base + e * inner] * y[base + e * inner];
          for (std::size_t e = 0; e < extent; ++e) {
            const std::size_t i = base + e * inner;
            gx[i] += y[i] * (g[i] - dotp);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t d = x.cols();
  if (gamma.numel() != d || beta.numel() != d) {
    throw ShapeError("layer_norm: input " + shape_string(x.shape()) + " with gamma " +
                     shape_string(gamma.shape()) + ", beta " + shape_string(beta.shape()));
  }
  const std::size_t rows = x.numel() / d;
  std::vector<T> values(x.numel());
  std::vector<T> normalized(x.numel());
  std::vector<T> rstd(rows);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = in.data() + r * d;
    T mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= T(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= T(d);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const T xhat = (row[j] - mean) * rstd[r];
      normalized[r * d + j] = xhat;
      values[r * d + j] = xhat * gamma.data()[j] + beta.data()[j];
    }
  }
  Tensor<T> out(x.shape(), std::move(values));
  if (Tape<T>* tape = tape_for<T>({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    tape->record([x, gamma, beta, out, rows, d, normalized = std::move(normalized),
                  rstd = std::move(rstd)]() mutable {
      if (!out.has_grad()) return;
      const auto g = out.grad();
      if (gamma.requires_grad() || beta.requires_grad()) {
        auto gg = gamma.mutable_grad();
        auto gb = beta.mutable_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < d; ++j) {
            gg[j] += g[r * d + j] * normalized[r * d + j];
            gb[j] += g[r * d + j];
          }
      }
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        std::vector<T> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          T mean_d = 0, mean_dx = 0;
          for (std::size_t j = 0; j < d; ++j) {
            dxhat[j] = g[r * d + j] * gamma.data()[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * normalized[r * d + j];
          }
          mean_d /= T(d);
          mean_dx /= T(d);
          for (std::size_t j = 0; j < d; ++j)
            gx[r * d + j] += rstd[r] * (dxhat[j] - mean_d - normalized[r * d + j] * mean_dx);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> embedding_lookup(std::span<const TokenId> ids, const Tensor<T>& table) {
  require_matrix(table, "embedding_lookup", "table");
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id sequence");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<T> values(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(vocab) + " rows");
    }
    const T* src = table.ptr() + static_cast<std::size_t>(ids[i]) * d;
    std::copy(src, src + d, values.begin() + i * d);
  }
  Tensor<T> out({ids.size(), d}, std::move(values));
  if (Tape<T>* tape = tape_for<T>({&table})) {
    out.set_requires_grad(true);
    std::vector<TokenId> saved(ids.begin(), ids.end());
    tape->record([table, out, saved = std::move(saved), d]() mutable {
      if (!out.has_grad()) return;
      T* gt = table.grad_ptr();
      const T* g = out.grad().data();
      for (std::size_t i = 0; i < saved.size(); ++i)
        simd::add<T>(g + i * d, gt + static_cast<std::size_t>(saved[i]) * d, d);
    });
  }
  return out;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
  require_matrix(x, "gather_rows", "input");
  if (rows.empty()) throw ShapeError("gather_rows: no rows selected");
  const std::size_t d = x.dim(1);
  std::vector<T> values(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0)) {
      throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                       shape_string(x.shape()));
    }
    std::copy_n(x.ptr() + rows[i] * d, d, values.begin() + i * d);
  }
  Tensor<T> out({rows.size(), d}, std::move(values));
  if (Tape<T>* tape = tape_for<T>({&x})) {
    out.set_requires_grad(true);
    std::vector<std::size_t> saved(rows.begin(), rows.end());
    tape->record([x, out, saved = std::move(saved), d]() mutable {
      if (!out.has_grad()) return;
      T* gx = x.grad_ptr();
      for (std::size_t i = 0; i < saved.size(); ++i)
        simd::add<T>(out.grad().data() + i * d, gx + saved[i] * d, d);
    });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be below 1");
  const std::size_t n = x.numel();
  const T keep_scale = T(1.0 / (1.0 - rate));
  std::vector<T> mask(n);
  std::vector<T> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng.bernoulli(rate) ? T(0) : keep_scale;
    values[i] = x.data()[i] * mask[i];
  }
  Tensor<T> out(x.shape(), std::move(values));
  if (Tape<T>* tape = tape_for<T>({&x})) {
    out.set_requires_grad(true);
    tape->record([x, out, mask = std::move(mask), n]() mutable {
      if (!out.has_grad()) return;
      auto gx = x.mutable_grad();
      const auto g = out.grad();
      for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * mask[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy_masked(const Tensor<T>& logits, std::span<const TokenId> targets,
                               TokenId ignore_id) {
  require_matrix(logits, "cross_entropy_masked", "logits");
  const std::size_t rows = logits.dim(0), vocab = logits.dim(1);
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy_masked: " + std::to_string(targets.size()) +
                     " targets for logits " + shape_string(logits.shape()));
  }
  std::size_t counted = 0;
  for (TokenId t : targets) {
    if (t == ignore_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw IndexError("cross_entropy_masked: target " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("cross_entropy_masked: every target is ignored");

  std::vector<T> probs(rows * vocab, T(0));
  T total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_id) continue;
    const T* row = logits.ptr() + r * vocab;
    T mx = *std::max_element(row, row + vocab);
    T z = 0;
    for (std::size_t j = 0; j < vocab; ++j) {
      probs[r * vocab + j] = std::exp(row[j] - mx);
      z += probs[r * vocab + j];
    }
    for (std::size_t j = 0; j < vocab; ++j) probs[r * vocab + j] /= z;
    total += (mx + std::log(z)) - row[static_cast<std::size_t>(targets[r])];
  }
  Tensor<T> out = Tensor<T>::scalar(total / T(counted));
  if (Tape<T>* tape = tape_for<T>({&logits})) {
    out.set_requires_grad(true);
    std::vector<TokenId> saved(targets.begin(), targets.end());
    tape->record([logits, out, probs = std::move(probs), saved = std::move(saved), rows, vocab,
                  counted, ignore_id]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0] / T(counted);
      T* gl = logits.grad_ptr();
      for (std::size_t r = 0; r < rows; ++r) {
        if (saved[r] == ignore_id) continue;
        simd::axpy<T>(g, probs.data() + r * vocab, gl + r * vocab, vocab);
        gl[r * vocab + static_cast<std::size_t>(saved[r])] -= g;
      }
    });
  }
  return out;
}

namespace {

template <typename T>
void check_attention_shapes(const Tensor<T>& q, const Tensor<T>& k, const AttentionMask& mask,
                            std::size_t n_heads) {
  require_matrix(q, "attention", "queries");
  require_matrix(k, "attention", "keys");
  if (q.dim(1) != k.dim(1)) {
    throw ShapeError("attention: query " + shape_string(q.shape()) + " and key " +
                     shape_string(k.shape()) + " widths differ");
  }
  if (n_heads == 0 || q.dim(1) % n_heads != 0) {
    throw ShapeError("attention: width " + std::to_string(q.dim(1)) + " not divisible by " +
                     std::to_string(n_heads) + " heads");
  }
  if (!mask.key_valid.empty() && mask.key_valid.size() != k.dim(0)) {
    throw ShapeError("attention: key mask of length " + std::to_string(mask.key_valid.size()) +
                     " for " + std::to_string(k.dim(0)) + " keys");
  }
  if (mask.block != 0 && q.dim(0) != k.dim(0)) {
    throw ShapeError("attention: block mask needs equal query and key lengths");
  }
}

// Fills probs[h][i][j]; masked entries are exactly zero.
template <typename T>
void attention_probs(const Tensor<T>& q, const Tensor<T>& k, const AttentionMask& mask,
                     std::size_t n_heads, std::vector<T>& probs) {
  const std::size_t lq = q.dim(0), lk = k.dim(0), d = q.dim(1), dh = d / n_heads;
  const T inv_sqrt = T(1) / std::sqrt(T(dh));
  probs.assign(n_heads * lq * lk, T(0));
  std::vector<std::uint8_t> allowed(lq * lk);
  for (std::size_t i = 0; i < lq; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < lk; ++j) {
      allowed[i * lk + j] = mask.allows(i, j) ? 1 : 0;
      any = any || allowed[i * lk + j];
    }
    if (!any) {
      throw std::invalid_argument("attention: every key position is masked for query " +
                                  std::to_string(i));
    }
  }
  for (std::size_t h = 0; h < n_heads; ++h) {
    T* p = probs.data() + h * lq * lk;
    simd::gemm<T>(Trans::kNo, Trans::kYes, lq, lk, dh, q.ptr() + h * dh, d, k.ptr() + h * dh, d, p,
                  lk, false);
    for (std::size_t i = 0; i < lq; ++i) {
      T* row = p + i * lk;
      const std::uint8_t* ok = allowed.data() + i * lk;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < lk; ++j)
        if (ok[j]) mx = std::max(mx, row[j] * inv_sqrt);
      T z = 0;
      for (std::size_t j = 0; j < lk; ++j) {
        row[j] = ok[j] ? std::exp(row[j] * inv_sqrt - mx) : T(0);
        z += row[j];
      }
      const T inv_z = T(1) / z;
      for (std::size_t j = 0; j < lk; ++j) row[j] *= inv_z;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    const AttentionMask& mask, std::size_t n_heads) {
  check_attention_shapes(q, k, mask, n_heads);
  if (v.shape() != k.shape()) {
    throw ShapeError("attention: value " + shape_string(v.shape()) + " differs from key " +
                     shape_string(k.shape()));
  }
  const std::size_t lq = q.dim(0), lk = k.dim(0), d = q.dim(1), dh = d / n_heads;
  std::vector<T> probs;
  attention_probs(q, k, mask, n_heads, probs);
  Tensor<T> out = Tensor<T>::zeros({lq, d});
  for (std::size_t h = 0; h < n_heads; ++h) {
    simd::gemm<T>(Trans::kNo, Trans::kNo, lq, dh, lk, probs.data() + h * lq * lk, lk,
                  v.ptr() + h * dh, d, out.mutable_ptr() + h * dh, d, false);
  }
  if (Tape<T>* tape = tape_for<T>({&q, &k, &v})) {
    out.set_requires_grad(true);
    tape->record([q, k, v, out, probs = std::move(probs), lq, lk, d, dh, n_heads]() mutable {
      if (!out.has_grad()) return;
      const T inv_sqrt = T(1) / std::sqrt(T(dh));
      const T* g = out.grad().data();
      std::vector<T> dp(lq * lk);
      for (std::size_t h = 0; h < n_heads; ++h) {
        const T* p = probs.data() + h * lq * lk;
        if (v.requires_grad())
          simd::gemm<T>(Trans::kYes, Trans::kNo, lk, dh, lq, p, lk, g + h * dh, d,
                        v.grad_ptr() + h * dh, d, true);
        if (!q.requires_grad() && !k.requires_grad()) continue;
        simd::gemm<T>(Trans::kNo, Trans::kYes, lq, lk, dh, g + h * dh, d, v.ptr() + h * dh, d,
                      dp.data(), lk, false);
        for (std::size_t i = 0; i < lq; ++i) {
          T* drow = dp.data() + i * lk;
          const T* prow = p + i * lk;
          const T rowdot = simd::dot<T>(drow, prow, lk);
          for (std::size_t j = 0; j < lk; ++j) drow[j] = prow[j] * (drow[j] - rowdot) * inv_sqrt;
        }
        if (q.requires_grad())
          simd::gemm<T>(Trans::kNo, Trans::kNo, lq, dh, lk, dp.data(), lk, k.ptr() + h * dh, d,
                        q.grad_ptr() + h * dh, d, true);
        if (k.requires_grad())
          simd::gemm<T>(Trans::kYes, Trans::kNo, lk, dh, lq, dp.data(), lk, q.ptr() + h * dh, d,
                        k.grad_ptr() + h * dh, d, true);
      }
    });
  }
  return out;
}

template <typename T>
std::vector<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k, const AttentionMask& mask,
                                 std::size_t n_heads) {
  check_attention_shapes(q, k, mask, n_heads);
  std::vector<T> probs;
  attention_probs(q, k, mask, n_heads, probs);
  return probs;
}

template <typename T>
std::vector<T> log_softmax_rows(const Tensor<T>& logits) {
  const std::size_t vocab = logits.cols(), rows = logits.numel() / vocab;
  std::vector<T> out(logits.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = logits.ptr() + r * vocab;
    const T mx = *std::max_element(row, row + vocab);
    T z = 0;
    for (std::size_t j = 0; j < vocab; ++j) z += std::exp(row[j] - mx);
    const T log_z = mx + std::log(z);
    for (std::size_t j = 0; j < vocab; ++j) out[r * vocab + j] = row[j] - log_z;
  }
  return out;
}

#define LIVECHAT_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> linear_transposed(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> add_positional(const Tensor<T>&, const Tensor<T>&, std::size_t);            \
  template Tensor<T> gelu(const Tensor<T>&);                                                     \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);        \
  template Tensor<T> embedding_lookup(std::span<const TokenId>, const Tensor<T>&);               \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);                \
  template Tensor<T> dropout(const Tensor<T>&, double, Rng&);                                    \
  template Tensor<T> cross_entropy_masked(const Tensor<T>&, std::span<const TokenId>, TokenId);  \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                               const AttentionMask&, std::size_t);                               \
  template std::vector<T> attention_weights(const Tensor<T>&, const Tensor<T>&,                  \
                                            const AttentionMask&, std::size_t);                  \
  template std::vector<T> log_softmax_rows(const Tensor<T>&);

LIVECHAT_INSTANTIATE_OPS(float)
LIVECHAT_INSTANTIATE_OPS(double)

#undef LIVECHAT_INSTANTIATE_OPS

}  // namespace livechat::tensor
