#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "condet/encoder.hpp"

namespace condet {

struct AdamOptions {
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update. With weight_decay > 0 the parameters are
// additionally shrunk by lr * weight_decay * param before the moment step.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamOptions& options);

inline void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
                      const AdamOptions& options) {
  adam_step(params.values(), grads.values(), state, options);
}

}  // namespace condet
