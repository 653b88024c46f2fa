#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "condet/objective.hpp"
#include "condet/random.hpp"

namespace gradcheck {

struct Case {
  condet::ModelParams params;
  condet::TokenizedBatch batch;
  condet::LossConfig config;
  std::string description;
};

inline std::vector<std::uint32_t> random_ids(condet::Rng& rng, std::size_t vocab) {
  std::vector<std::uint32_t> ids(1 + rng.index(8));
  for (auto& id : ids) id = static_cast<std::uint32_t>(rng.index(vocab));
  return ids;
}

// Small random model, batch and loss settings: d_h <= 16, d_p <= 8, b in {2, 3, 4}.
inline Case random_case(std::uint64_t seed) {
  condet::Rng rng(seed);
  condet::ModelDims dims;
  dims.vocab = 12 + rng.index(20);
  dims.embed = 2 + rng.index(6);
  dims.hidden = 2 + rng.index(15);
  dims.proj_hidden = 2 + rng.index(10);
  dims.proj = 2 + rng.index(7);
  Case c{condet::init_params(dims, rng.next()), {}, {}, {}};
  // Spread the embeddings so pooled inputs are not all near zero.
  for (double& x : c.params.block(condet::Block::embedding)) x *= 0.8;

  const std::size_t b = 2 + rng.index(3);
  for (std::size_t i = 0; i < b; ++i) {
    c.batch.source.push_back(random_ids(rng, dims.vocab));
    c.batch.source_pert.push_back(random_ids(rng, dims.vocab));
    c.batch.target.push_back(random_ids(rng, dims.vocab));
    c.batch.target_pert.push_back(random_ids(rng, dims.vocab));
    c.batch.labels.push_back(static_cast<int>(rng.index(2)));
  }
  c.config.lambda1 = rng.uniform(0.1, 0.9);
  c.config.lambda2 = rng.uniform(0.2, 2.0);
  c.config.temperature = rng.uniform(0.2, 1.0);
  switch (rng.index(3)) {
    case 0: c.config.kernel = {condet::KernelKind::linear, std::nullopt}; break;
    case 1: c.config.kernel = {condet::KernelKind::rbf, rng.uniform(0.5, 2.0)}; break;
    default: c.config.kernel = {condet::KernelKind::rbf, std::nullopt}; break;
  }
  c.description = "seed=" + std::to_string(seed) + " b=" + std::to_string(b) +
                  " d_h=" + std::to_string(dims.hidden) + " d_p=" + std::to_string(dims.proj) +
                  " kernel=" + std::string(condet::to_string(c.config.kernel.kind));
  return c;
}

enum class Component { full, ce, contrastive, mmd };

inline const char* name(Component c) {
  switch (c) {
    case Component::full: return "full";
    case Component::ce: return "ce";
    case Component::contrastive: return "contrastive";
    case Component::mmd: return "mmd";
  }
  return "full";
}

// Loss settings that keep only one component, with the other weights zeroed.
inline std::pair<condet::LossConfig, condet::Ablation> isolate(condet::LossConfig config,
                                                                Component c) {
  switch (c) {
    case Component::full: return {config, condet::Ablation::full};
    case Component::ce: return {config, condet::Ablation::source_only};
    case Component::contrastive:
      config.lambda1 = 1.0;
      return {config, condet::Ablation::no_mmd};
    case Component::mmd:
      config.lambda1 = 0.0;
      return {config, condet::Ablation::no_ce};
  }
  return {config, condet::Ablation::full};
}

struct Report {
  double worst_ratio = 0.0;     // max over coordinates of |a - n| / max(rtol * scale, atol)
  double max_rel_error = 0.0;   // |a - n| / max(|a|, |n|) over coordinates above atol
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;

  bool passed() const { return worst_ratio < 1.0; }
};

// Compares analytic gradients with central differences on every parameter.
// A coordinate passes when |a - n| <= rtol * max(|a|, |n|) or |a - n| <= atol.
inline Report check(const Case& c, Component component, double step = 1e-4, double rtol = 1e-4,
                    double atol = 1e-8) {
  const auto [config, ablation] = isolate(c.config, component);
  const auto analytic = condet::loss_and_grads(c.batch, c.params, config, ablation).grads;
  condet::ModelParams p = c.params;
  Report report;
  auto values = p.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + step;
    const double up = condet::loss_and_grads(c.batch, p, config, ablation).loss.total;
    values[i] = keep - step;
    const double down = condet::loss_and_grads(c.batch, p, config, ablation).loss.total;
    values[i] = keep;
    const double numeric = (up - down) / (2 * step);
    const double a = analytic.values()[i];
    const double diff = std::abs(a - numeric);
    const double scale = std::max(std::abs(a), std::abs(numeric));
    const double ratio = diff / std::max(rtol * scale, atol);
    if (ratio > report.worst_ratio) {
      report.worst_ratio = ratio;
      report.worst_index = i;
    }
    report.max_abs_error = std::max(report.max_abs_error, diff);
    if (diff > atol) report.max_rel_error = std::max(report.max_rel_error, diff / scale);
    ++report.checked;
  }
  return report;
}

}  // namespace gradcheck
