#include "mid/optim.hpp"

#include <cmath>

namespace mid {

void adamw_step(std::vector<Param*>& params, const AdamWConfig& cfg) {
  for (Param* p : params) {
    if (!p->grad.all_finite())
      throw NumericError("adamw_step: non-finite gradient in parameter '" + p->name + "'");
  }
  for (Param* p : params) {
    p->step_count += 1;
    const double t = static_cast<double>(p->step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double g = p->grad.data[i];
      double& m = p->adam_m.data[i];
      double& v = p->adam_v.data[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      double& w = p->value.data[i];
      w -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * w);
    }
    p->zero_grad();
  }
}

void adamw_step(std::vector<Param>& params, const AdamWConfig& cfg) {
  std::vector<Param*> ptrs;
  ptrs.reserve(params.size());
  for (auto& p : params) ptrs.push_back(&p);
  adamw_step(ptrs, cfg);
}

}  // namespace mid
