#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "livechat/model/params.hpp"
#include "livechat/tensor/tape.hpp"

namespace livechat::testing {

struct GroupError {
  std::string name;
  double relative_error = 0.0;
  double grad_norm = 0.0;
};

// Compares tape gradients of loss() with central differences for every
// element of every tensor. Groups whose gradient is identically tiny compare
// absolutely.
inline std::vector<GroupError> check_gradients(const std::vector<model::NamedTensor<double>>& params,
                                               const std::function<tensor::Tensor<double>()>& loss,
                                               double h = 1e-5) {
  for (const auto& p : params) p.tensor.drop_grad();
  {
    tensor::Tape<double> tape;
    tensor::TapeScope<double> scope(tape);
    auto value = loss();
    tape.backward(value);
  }
  std::vector<GroupError> out;
  for (const auto& p : params) {
    auto values = tensor::Tensor<double>(p.tensor).mutable_data();
    const auto grad = p.tensor.grad();
    double diff = 0.0, norm_ad = 0.0, norm_fd = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + h;
      const double up = loss().item();
      values[k] = saved - h;
      const double down = loss().item();
      values[k] = saved;
      const double fd = (up - down) / (2 * h);
      const double ad = grad.empty() ? 0.0 : grad[k];
      diff += (ad - fd) * (ad - fd);
      norm_ad += ad * ad;
      norm_fd += fd * fd;
    }
    diff = std::sqrt(diff);
    const double scale = std::max(std::sqrt(norm_ad), std::sqrt(norm_fd));
    out.push_back({p.name, scale < 1e-8 ? diff : diff / scale, std::sqrt(norm_ad)});
  }
  for (const auto& p : params) p.tensor.drop_grad();
  return out;
}

}  // namespace livechat::testing
