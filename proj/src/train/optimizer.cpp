#include "livechat/train/optimizer.hpp"

#include <cmath>

#include "livechat/common/errors.hpp"

namespace livechat::train {

template <typename T>
double global_grad_norm(const std::vector<NamedTensor<T>>& params) {
  double total = 0.0;
  for (const auto& p : params) {
    for (T g : p.tensor.grad()) total += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(total);
}

template <typename T>
double clip_gradients(const std::vector<NamedTensor<T>>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_gradients: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (T& g : p.tensor.mutable_grad()) g = static_cast<T>(static_cast<double>(g) * factor);
    }
  }
  return norm;
}

template <typename T>
Adam<T>::Adam(std::vector<NamedTensor<T>> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr >= 0.0)) throw ConfigError("adam: lr must be non-negative");
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(beta1_, t);
  const double correction2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<T>& tensor = params_[i].tensor;
    const auto values = tensor.mutable_data();
    const auto grad = tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[k]);
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      const double update = lr_ * (m[k] / correction1) / (std::sqrt(v[k] / correction2) + eps_);
      values[k] = static_cast<T>(static_cast<double>(values[k]) - update);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (const auto& p : params_) p.tensor.drop_grad();
}

template double global_grad_norm(const std::vector<NamedTensor<float>>&);
template double global_grad_norm(const std::vector<NamedTensor<double>>&);
template double clip_gradients(const std::vector<NamedTensor<float>>&, double);
template double clip_gradients(const std::vector<NamedTensor<double>>&, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace livechat::train
