#pragma once

#include <functional>
#include <vector>

#include "rmae/tensor.hpp"

namespace rmae::inline RMAE_ABI {

// central: (f(x+h) - f(x-h)) / 2h. richardson: (4 D(h/2) - D(h)) / 3, which
// cancels the h^2 error term and resolves gradients near the 1e-8 floor.
enum class FdScheme { central, richardson };

// Compares backward() against central finite differences. Returns the max
// over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
// `f` must rebuild its graph on every call and be deterministic.
Scalar grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  Scalar h, FdScheme scheme = FdScheme::central);

// Same check over several leaves of one scalar function (e.g. inputs plus
// every parameter of a block).
Scalar grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                  Scalar h, FdScheme scheme = FdScheme::central);

// Step size suited to the active Scalar type.
constexpr Scalar default_fd_step() {
  if constexpr (sizeof(Scalar) == 8) {
    return Scalar(1e-4);
  } else {
    return Scalar(1e-3);
  }
}

}  // namespace rmae::inline RMAE_ABI
