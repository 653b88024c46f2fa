#include "condet/optim.hpp"

#include <cmath>

#include "condet/error.hpp"

namespace condet {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamOptions& options) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw UsageError("adam_step: parameter, gradient and moment sizes differ");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(options.beta1, t);
  const double correct2 = 1.0 - std::pow(options.beta2, t);
  const double lr = options.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = options.beta1 * state.m[i] + (1.0 - options.beta1) * g;
    state.v[i] = options.beta2 * state.v[i] + (1.0 - options.beta2) * g * g;
    if (lr == 0.0) continue;
    if (options.weight_decay != 0.0) params[i] -= lr * options.weight_decay * params[i];
    const double m_hat = state.m[i] / correct1;
    const double v_hat = state.v[i] / correct2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + options.epsilon);
  }
}

}  // namespace condet
