#pragma once

#include <cstddef>
#include <vector>

#include "livechat/model/params.hpp"

namespace livechat::train {

using model::NamedTensor;
using tensor::Tensor;

// Euclidean norm of all gradients (missing gradients count as zero).
template <typename T>
double global_grad_norm(const std::vector<NamedTensor<T>>& params);

// Rescales gradients so their global norm is at most max_norm. Returns the
// norm before clipping.
template <typename T>
double clip_gradients(const std::vector<NamedTensor<T>>& params, double max_norm);

// Adam with bias correction over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<NamedTensor<T>> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  // Applies one update from the current gradients. Tensors without a gradient
  // are treated as having a zero gradient.
  void step();

  void zero_grad();

  const std::vector<NamedTensor<T>>& params() const { return params_; }
  std::size_t steps() const { return steps_; }

 private:
  std::vector<NamedTensor<T>> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t steps_ = 0;
};

}  // namespace livechat::train
