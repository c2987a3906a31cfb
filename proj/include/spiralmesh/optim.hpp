#pragma once

#include <span>

#include "spiralmesh/autodiff.hpp"

namespace spiralmesh {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// L2 penalty folded into the gradient (g += weight_decay * theta).
  double weight_decay = 0.0;
};

/// One bias-corrected Adam update of every parameter from its current grad.
void adam_step(std::span<Parameter> params, const AdamOptions& options);

void zero_grad(std::span<Parameter> params);

}  // namespace spiralmesh
