#pragma once

#include <vector>

#include "pnrf/util.hpp"

namespace pnrf {

// Flat differentiable parameter storage. The gradient buffer is allocated on
// first use and always matches the value buffer element count.
template <class S>
struct ParamTensor {
  std::vector<int> shape;
  std::vector<S> values;
  std::vector<S> grad;  // empty until first backward touches it
  bool requires_grad = true;

  ParamTensor() = default;
  ParamTensor(std::vector<int> shape_, std::vector<S> values_, bool requires_grad_ = true)
      : shape(std::move(shape_)), values(std::move(values_)), requires_grad(requires_grad_) {
    check_arg(static_cast<int64_t>(values.size()) == numel(shape),
              cat("ParamTensor: ", values.size(), " values for shape ", shape_str(shape)));
  }

  int64_t size() const { return static_cast<int64_t>(values.size()); }

  std::vector<S>& ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), S(0));
    return grad;
  }

  void zero_grad() {
    if (!grad.empty()) grad.assign(values.size(), S(0));
  }
};

}  // namespace pnrf
