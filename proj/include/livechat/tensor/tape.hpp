#pragma once

#include <functional>
#include <vector>

#include "livechat/tensor/tensor.hpp"

namespace livechat::tensor {

// Ordered record of differentiable operations. Operations append their
// backward rule when executed under an active tape; backward() replays the
// rules in reverse, which is a valid reverse topological order because every
// rule is appended after the rules of its inputs' producers.
template <typename T>
class Tape {
 public:
  void record(std::function<void()> backward_rule) { rules_.push_back(std::move(backward_rule)); }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule. The tape is
  // cleared afterwards, releasing intermediate tensors.
  void backward(Tensor<T>& loss) {
    if (loss.numel() != 1) {
      throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
    }
    if (!loss.requires_grad()) {
      throw std::invalid_argument("backward(): loss does not depend on any tensor requiring grad");
    }
    loss.mutable_grad()[0] += T(1);
    for (auto it = rules_.rbegin(); it != rules_.rend(); ++it) (*it)();
    rules_.clear();
  }

  void clear() { rules_.clear(); }
  std::size_t size() const { return rules_.size(); }

 private:
  std::vector<std::function<void()>> rules_;
};

namespace detail {
template <typename T>
inline thread_local Tape<T>* current_tape = nullptr;
}

template <typename T>
Tape<T>* active_tape() {
  return detail::current_tape<T>;
}

// Makes a tape the recording target for this thread for the scope lifetime.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(detail::current_tape<T>) {
    detail::current_tape<T> = &tape;
  }
  ~TapeScope() { detail::current_tape<T> = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

// Suspends recording (evaluation, parameter updates).
template <typename T>
class NoTapeScope {
 public:
  NoTapeScope() : previous_(detail::current_tape<T>) { detail::current_tape<T> = nullptr; }
  ~NoTapeScope() { detail::current_tape<T> = previous_; }
  NoTapeScope(const NoTapeScope&) = delete;
  NoTapeScope& operator=(const NoTapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

}  // namespace livechat::tensor
