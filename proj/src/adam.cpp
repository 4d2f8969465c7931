#include "mhp/adam.hpp"

#include <cmath>

#include "mhp/error.hpp"

namespace mhp {

void adam_step(const ParamRefs& params, const GradientMap& grads, AdamState& state) {
  if (state.first_moment.empty()) {
    state.first_moment.reserve(params.size());
    state.second_moment.reserve(params.size());
    for (const auto& p : params) {
      state.first_moment.push_back(Tensor::zeros(p.value->shape));
      state.second_moment.push_back(Tensor::zeros(p.value->shape));
    }
  }
  require(state.first_moment.size() == params.size(),
          "adam_step: state sized for a different parameter set");

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = grads.find(static_cast<std::uint32_t>(i));
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    Tensor& p = *params[i].value;
    require(g.shape == p.shape, "adam_step: gradient shape mismatch for " + params[i].name);
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

double clip_global_norm(GradientMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [pid, g] : grads) {
    for (double v : g.data) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [pid, g] : grads) {
      for (double& v : g.data) v *= s;
    }
  }
  return norm;
}

}  // namespace mhp
