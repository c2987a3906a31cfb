#include "spiralmesh/optim.hpp"

#include <cmath>

namespace spiralmesh {

void adam_step(std::span<Parameter> params, const AdamOptions& o) {
  for (Parameter& p : params) {
    ++p.step_count;
    Matrix g = p.grad;
    if (o.weight_decay != 0.0) g += o.weight_decay * p.value;
    p.adam_m = o.beta1 * p.adam_m + (1.0 - o.beta1) * g;
    p.adam_v = o.beta2 * p.adam_v + (1.0 - o.beta2) * g.cwiseAbs2();
    const double t = static_cast<double>(p.step_count);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    p.value.array() -=
        o.lr * (p.adam_m.array() / c1) / ((p.adam_v.array() / c2).sqrt() + o.eps);
  }
}

void zero_grad(std::span<Parameter> params) {
  for (Parameter& p : params) p.zero_grad();
}

}  // namespace spiralmesh
