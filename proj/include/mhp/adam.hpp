#pragma once

#include <string>
#include <vector>

#include "mhp/graph.hpp"
#include "mhp/tensor.hpp"

namespace mhp {

/// Named view into a model's trainable tensors. Declaration order is stable
/// and doubles as the parameter-id and checkpoint order.
struct ParamRef {
  std::string name;
  Tensor* value;
};
using ParamRefs = std::vector<ParamRef>;

struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  std::vector<Tensor> first_moment;   // lazily sized to the parameters
  std::vector<Tensor> second_moment;
};

/// One bias-corrected Adam update. Gradient map keys are parameter indices
/// into `params`; missing keys are treated as zero gradients.
void adam_step(const ParamRefs& params, const GradientMap& grads, AdamState& state);

/// Scales all gradients by max_norm/norm when the global L2 norm exceeds
/// max_norm. Returns the pre-clip norm.
double clip_global_norm(GradientMap& grads, double max_norm);

}  // namespace mhp
