#include "condet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "condet/error.hpp"

namespace condet {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sorted_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

// Pooled view of (zs, zt) rows.
struct Pooled {
  const Matrix& zs;
  const Matrix& zt;
  std::size_t size() const { return zs.rows() + zt.rows(); }
  std::span<const double> row(std::size_t i) const {
    return i < zs.rows() ? zs.row(i) : zt.row(i - zs.rows());
  }
};

struct MedianPick {
  double value = 1.0;
  // Pairs whose squared distance defines the median, with weight 1 or 1/2.
  std::vector<std::tuple<std::size_t, std::size_t, double>> pairs;
};

MedianPick median_squared_distance(const Matrix& zs, const Matrix& zt) {
  const Pooled pooled{zs, zt};
  std::vector<std::tuple<double, std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    for (std::size_t j = i + 1; j < pooled.size(); ++j) {
      all.emplace_back(squared_distance(pooled.row(i), pooled.row(j)), i, j);
    }
  }
  MedianPick pick;
  if (all.empty()) return pick;
  std::sort(all.begin(), all.end());
  const std::size_t n = all.size();
  if (n % 2 == 1) {
    const auto& [d, i, j] = all[n / 2];
    pick.value = d;
    pick.pairs.emplace_back(i, j, 1.0);
  } else {
    const auto& [d1, i1, j1] = all[n / 2 - 1];
    const auto& [d2, i2, j2] = all[n / 2];
    pick.value = 0.5 * (d1 + d2);
    pick.pairs.emplace_back(i1, j1, 0.5);
    pick.pairs.emplace_back(i2, j2, 0.5);
  }
  if (!(pick.value > 0.0)) {
    pick.value = 1.0;
    pick.pairs.clear();
  }
  return pick;
}

}  // namespace

void KernelSpec::validate() const {
  if (kind == KernelKind::rbf && bandwidth && !(*bandwidth > 0.0)) {
    throw UsageError("rbf bandwidth must be positive");
  }
}

void LossConfig::validate() const {
  if (!(temperature > 0.0)) throw UsageError("temperature must be positive");
  if (!(lambda1 >= 0.0 && lambda1 <= 1.0)) throw UsageError("lambda1 must lie in [0, 1]");
  if (!(lambda2 >= 0.0)) throw UsageError("lambda2 must be nonnegative");
  if (!(prob_epsilon > 0.0 && prob_epsilon < 0.5)) throw UsageError("probability clamp must lie in (0, 0.5)");
  kernel.validate();
}

std::string_view to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::full: return "full";
    case Ablation::no_ce: return "no_ce";
    case Ablation::no_contrast: return "no_contrast";
    case Ablation::no_mmd: return "no_mmd";
    case Ablation::source_only: return "source_only";
  }
  return "full";
}

Ablation parse_ablation(std::string_view name) {
  for (Ablation a : {Ablation::full, Ablation::no_ce, Ablation::no_contrast, Ablation::no_mmd,
                     Ablation::source_only}) {
    if (to_string(a) == name) return a;
  }
  throw UsageError("unknown ablation '" + std::string(name) + "'");
}

std::string_view to_string(KernelKind kind) { return kind == KernelKind::linear ? "linear" : "rbf"; }

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "linear") return KernelKind::linear;
  if (name == "rbf") return KernelKind::rbf;
  throw UsageError("unknown kernel '" + std::string(name) + "'");
}

double ce_loss(std::span<const double> probs, std::span<const int> labels, double eps,
               std::span<double> dprobs) {
  if (probs.size() != labels.size()) throw UsageError("ce_loss: probability and label counts differ");
  if (probs.empty()) throw UsageError("ce_loss: empty batch");
  if (!dprobs.empty() && dprobs.size() != probs.size()) throw UsageError("ce_loss: gradient size mismatch");
  const double inv_b = 1.0 / static_cast<double>(probs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], eps, 1.0 - eps);
    const bool positive = labels[i] == 1;
    total -= positive ? std::log(p) : std::log1p(-p);
    if (!dprobs.empty()) {
      const bool clamped = !(probs[i] > eps && probs[i] < 1.0 - eps);
      dprobs[i] = clamped ? 0.0 : -inv_b * (positive ? 1.0 / p : -1.0 / (1.0 - p));
    }
  }
  return total * inv_b;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b, double norm_epsilon) {
  const double eps2 = norm_epsilon * norm_epsilon;
  return dot(a, b) / (std::sqrt(dot(a, a) + eps2) * std::sqrt(dot(b, b) + eps2));
}

double ntxent(const Matrix& anchors, const Matrix& positives, const ContrastiveOptions& options,
              Matrix* d_anchors, Matrix* d_positives) {
  const std::size_t b = anchors.rows();
  const std::size_t dim = anchors.cols();
  if (positives.rows() != b || positives.cols() != dim) throw UsageError("ntxent: anchor/positive shape mismatch");
  if (b == 0) throw UsageError("ntxent: empty batch");
  if (!(options.temperature > 0.0)) throw UsageError("ntxent: temperature must be positive");
  if (d_anchors) *d_anchors = Matrix(b, dim);
  if (d_positives) *d_positives = Matrix(b, dim);
  if (b == 1) return 0.0;

  const std::size_t n = 2 * b;
  auto view = [&](std::size_t k) { return k % 2 == 0 ? anchors.row(k / 2) : positives.row(k / 2); };
  auto partner = [](std::size_t k) { return k ^ std::size_t{1}; };

  const double eps2 = options.norm_epsilon * options.norm_epsilon;
  Matrix unit(n, dim);
  std::vector<double> norms(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto z = view(k);
    norms[k] = std::sqrt(dot(z, z) + eps2);
    for (std::size_t c = 0; c < dim; ++c) unit(k, c) = z[c] / norms[k];
  }
  const double inv_t = 1.0 / options.temperature;
  Matrix logits(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) logits(i, j) = dot(unit.row(i), unit.row(j)) * inv_t;
  }

  const bool symmetric = options.orientation == ContrastiveOrientation::symmetric;
  const std::size_t terms = symmetric ? n : b;
  const double weight = options.reduction == ContrastiveReduction::mean ? 1.0 / static_cast<double>(terms) : 1.0;
  const bool want_grad = d_anchors != nullptr || d_positives != nullptr;
  Matrix d_logits(want_grad ? n : 0, want_grad ? n : 0);

  double total = 0.0;
  for (std::size_t a = 0; a < n; a += symmetric ? 1 : 2) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (k != a) max_logit = std::max(max_logit, logits(a, k));
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != a) denom += std::exp(logits(a, k) - max_logit);
    }
    const double lse = max_logit + std::log(denom);
    total += lse - logits(a, partner(a));
    if (want_grad) {
      for (std::size_t k = 0; k < n; ++k) {
        if (k == a) continue;
        d_logits(a, k) += weight * std::exp(logits(a, k) - lse);
      }
      d_logits(a, partner(a)) -= weight;
    }
  }

  if (want_grad) {
    // logits(i, j) = u_i . u_j / t
    Matrix d_unit(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double g = d_logits(i, j) * inv_t;
        if (g == 0.0) continue;
        for (std::size_t c = 0; c < dim; ++c) {
          d_unit(i, c) += g * unit(j, c);
          d_unit(j, c) += g * unit(i, c);
        }
      }
    }
    // u = z / sqrt(|z|^2 + eps^2): dz = du / n - z (z . du) / n^3
    for (std::size_t k = 0; k < n; ++k) {
      const auto z = view(k);
      const double zg = dot(z, d_unit.row(k));
      const double inv_n = 1.0 / norms[k];
      const double inv_n3 = inv_n * inv_n * inv_n;
      Matrix* target = k % 2 == 0 ? d_anchors : d_positives;
      if (target == nullptr) continue;
      auto out = target->row(k / 2);
      for (std::size_t c = 0; c < dim; ++c) out[c] = d_unit(k, c) * inv_n - z[c] * zg * inv_n3;
    }
  }
  return total * weight;
}

double rbf_bandwidth_sq(const Matrix& zs, const Matrix& zt, const KernelSpec& kernel) {
  if (kernel.bandwidth) return *kernel.bandwidth * *kernel.bandwidth;
  return median_squared_distance(zs, zt).value;
}

double mmd(const Matrix& zs, const Matrix& zt, const KernelSpec& kernel, Matrix* d_zs, Matrix* d_zt) {
  kernel.validate();
  if (zs.rows() == 0 || zt.rows() == 0) throw UsageError("mmd: empty sample set");
  if (zs.cols() != zt.cols()) throw UsageError("mmd: dimension mismatch");
  const std::size_t n = zs.rows();
  const std::size_t m = zt.rows();
  const std::size_t dim = zs.cols();
  const bool rbf = kernel.kind == KernelKind::rbf;

  MedianPick median;
  double bw2 = 1.0;
  if (rbf) {
    if (kernel.bandwidth) {
      bw2 = *kernel.bandwidth * *kernel.bandwidth;
    } else {
      median = median_squared_distance(zs, zt);
      bw2 = median.value;
    }
  }
  auto k = [&](std::span<const double> x, std::span<const double> y) {
    return rbf ? std::exp(-squared_distance(x, y) / (2.0 * bw2)) : dot(x, y);
  };

  const double wss = 1.0 / static_cast<double>(n * n);
  const double wtt = 1.0 / static_cast<double>(m * m);
  const double wst = 2.0 / static_cast<double>(n * m);

  std::vector<double> ss, tt, st;
  ss.reserve(n * n);
  tt.reserve(m * m);
  st.reserve(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) ss.push_back(k(zs.row(i), zs.row(j)));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) tt.push_back(k(zt.row(i), zt.row(j)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) st.push_back(k(zs.row(i), zt.row(j)));
  const double value = (sorted_sum(ss) * wss + sorted_sum(tt) * wtt) - sorted_sum(st) * wst;

  if (d_zs == nullptr && d_zt == nullptr) return value;

  Matrix gs(n, dim), gt(m, dim);
  double d_bw2 = 0.0;
  // Adds coeff * dk(x, y) to gx, gy.
  auto accumulate = [&](std::span<const double> x, std::span<const double> y, double coeff,
                        std::span<double> gx, std::span<double> gy) {
    if (rbf) {
      const double d2 = squared_distance(x, y);
      const double kv = std::exp(-d2 / (2.0 * bw2));
      const double scale = coeff * kv / bw2;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = x[c] - y[c];
        gx[c] -= scale * diff;
        gy[c] += scale * diff;
      }
      d_bw2 += coeff * kv * d2 / (2.0 * bw2 * bw2);
    } else {
      for (std::size_t c = 0; c < dim; ++c) {
        gx[c] += coeff * y[c];
        gy[c] += coeff * x[c];
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) accumulate(zs.row(i), zs.row(j), wss, gs.row(i), gs.row(j));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) accumulate(zt.row(i), zt.row(j), wtt, gt.row(i), gt.row(j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) accumulate(zs.row(i), zt.row(j), -wst, gs.row(i), gt.row(j));

  if (rbf && !kernel.bandwidth && d_bw2 != 0.0) {
    const Pooled pooled{zs, zt};
    auto grad_row = [&](std::size_t p) { return p < n ? gs.row(p) : gt.row(p - n); };
    for (const auto& [p, q, w] : median.pairs) {
      const auto xp = pooled.row(p);
      const auto xq = pooled.row(q);
      auto gp = grad_row(p);
      auto gq = grad_row(q);
      for (std::size_t c = 0; c < dim; ++c) {
        const double g = d_bw2 * w * 2.0 * (xp[c] - xq[c]);
        gp[c] += g;
        gq[c] -= g;
      }
    }
  }
  if (d_zs) *d_zs = std::move(gs);
  if (d_zt) *d_zt = std::move(gt);
  return value;
}

double LossBreakdown::mmd_norm() const { return std::sqrt(std::max(0.0, mmd)); }

std::string LossBreakdown::to_json_line(std::size_t step) const {
  nlohmann::ordered_json line;
  line["step"] = step;
  line["total"] = total;
  line["ce"] = ce;
  line["ce_pert"] = ce_pert;
  line["ctr_s"] = ctr_s;
  line["ctr_t"] = ctr_t;
  line["mmd"] = mmd;
  return line.dump();
}

ObjectiveWeights ObjectiveWeights::from(const LossConfig& config, Ablation ablation) {
  ObjectiveWeights w{(1.0 - config.lambda1) / 2.0, config.lambda1 / 2.0, config.lambda2};
  switch (ablation) {
    case Ablation::full: break;
    case Ablation::no_ce: w.ce = 0.0; break;
    case Ablation::no_contrast: w.contrastive = 0.0; break;
    case Ablation::no_mmd: w.mmd = 0.0; break;
    case Ablation::source_only:
      w.contrastive = 0.0;
      w.mmd = 0.0;
      break;
  }
  return w;
}

ContrastiveOptions contrastive_options(const LossConfig& config) {
  return {config.temperature, config.reduction, config.orientation, 1e-8};
}

LossBreakdown combined_objective(const BatchEmbeddings& batch, const LossConfig& config,
                                 Ablation ablation) {
  config.validate();
  const auto w = ObjectiveWeights::from(config, ablation);
  LossBreakdown out;
  if (w.ce != 0.0) {
    out.ce = ce_loss(batch.probs, batch.labels, config.prob_epsilon);
    out.ce_pert = ce_loss(batch.probs_pert, batch.labels, config.prob_epsilon);
    out.total += w.ce * (out.ce + out.ce_pert);
  }
  if (w.contrastive != 0.0) {
    const auto options = contrastive_options(config);
    out.ctr_s = ntxent(batch.source, batch.source_pert, options);
    out.ctr_t = ntxent(batch.target, batch.target_pert, options);
    out.total += w.contrastive * (out.ctr_s + out.ctr_t);
  }
  if (w.mmd != 0.0) {
    out.mmd = mmd(batch.source, batch.target, config.kernel);
    out.total += w.mmd * out.mmd;
  }
  return out;
}

}  // namespace condet
