#include "mid/finite_diff.hpp"

#include <cmath>
#include <string>

namespace mid {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_grad: h must be positive");
  Tensor grad(x.shape);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double orig = probe.data[i];
    probe.data[i] = orig + h;
    const double fp = f(probe);
    probe.data[i] = orig - h;
    const double fm = f(probe);
    probe.data[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " +
                         std::to_string(i));
    grad.data[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace mid
