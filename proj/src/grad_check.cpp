#include "rmae/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace rmae::inline RMAE_ABI {

Scalar grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                  Scalar h, FdScheme scheme) {
  for (Tensor& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  backward(f());

  std::vector<std::vector<Scalar>> analytic;
  analytic.reserve(leaves.size());
  for (Tensor& t : leaves) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), Scalar(0));
    }
  }

  NoGradGuard no_grad;
  Scalar worst = 0;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto data = leaves[l].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Scalar saved = data[i];
      auto central = [&](Scalar step) {
        data[i] = saved + step;
        const Scalar up = f().item();
        data[i] = saved - step;
        const Scalar down = f().item();
        data[i] = saved;
        return (up - down) / (Scalar(2) * step);
      };
      Scalar numeric = central(h);
      if (scheme == FdScheme::richardson) {
        numeric = (Scalar(4) * central(h / 2) - numeric) / Scalar(3);
      }
      const Scalar a = analytic[l][i];
      const Scalar denom = std::max(Scalar(1e-8), std::abs(a) + std::abs(numeric));
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

Scalar grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                  Scalar h, FdScheme scheme) {
  return grad_check([&] { return f(x); }, std::vector<Tensor>{x}, h, scheme);
}

}  // namespace rmae::inline RMAE_ABI
