#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "condet/matrix.hpp"

namespace condet {

enum class KernelKind { linear, rbf };

// rbf: k(x, y) = exp(-|x - y|^2 / (2 bandwidth^2)). Without a fixed bandwidth
// the median heuristic is used: bandwidth^2 = median of the squared pairwise
// distances over the pooled source+target rows (1.0 when that median is 0).
struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  std::optional<double> bandwidth;

  void validate() const;
};

enum class ContrastiveReduction { mean, sum };
enum class ContrastiveOrientation { symmetric, anchor_only };

struct LossConfig {
  double lambda1 = 0.5;
  double lambda2 = 1.0;
  double temperature = 0.5;
  KernelSpec kernel;
  double prob_epsilon = 1e-7;
  ContrastiveReduction reduction = ContrastiveReduction::mean;
  ContrastiveOrientation orientation = ContrastiveOrientation::symmetric;

  void validate() const;
};

enum class Ablation { full, no_ce, no_contrast, no_mmd, source_only };

std::string_view to_string(Ablation ablation);
Ablation parse_ablation(std::string_view name);
std::string_view to_string(KernelKind kind);
KernelKind parse_kernel_kind(std::string_view name);

// Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps].
// If `dprobs` is non-empty it receives dL/dp (zero where the clamp is active).
double ce_loss(std::span<const double> probs, std::span<const int> labels, double eps,
               std::span<double> dprobs = {});

struct ContrastiveOptions {
  double temperature = 0.5;
  ContrastiveReduction reduction = ContrastiveReduction::mean;
  ContrastiveOrientation orientation = ContrastiveOrientation::symmetric;
  double norm_epsilon = 1e-8;  // norms are sqrt(|z|^2 + eps^2)
};

double cosine_similarity(std::span<const double> a, std::span<const double> b,
                         double norm_epsilon = 1e-8);

// NT-Xent over the 2b views {a_1, p_1, ..., a_b, p_b}. Each anchor view is
// scored against its partner with every other view in the batch as negative.
// Symmetric orientation scores all 2b views, anchor_only the b anchors; the
// mean reduction divides by the number of scored views. b = 1 returns 0.
double ntxent(const Matrix& anchors, const Matrix& positives, const ContrastiveOptions& options,
              Matrix* d_anchors = nullptr, Matrix* d_positives = nullptr);

// Squared bandwidth actually used for an rbf kernel on this pair of sets.
double rbf_bandwidth_sq(const Matrix& zs, const Matrix& zt, const KernelSpec& kernel);

// Biased (V-statistic) squared MMD. Exactly symmetric in (zs, zt): each of the
// three kernel sums is accumulated in sorted order. Gradients include the
// dependence of a median-heuristic bandwidth on the inputs.
double mmd(const Matrix& zs, const Matrix& zt, const KernelSpec& kernel,
           Matrix* d_zs = nullptr, Matrix* d_zt = nullptr);

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;
  double ce_pert = 0.0;
  double ctr_s = 0.0;
  double ctr_t = 0.0;
  double mmd = 0.0;  // squared MMD, the optimized quantity

  double mmd_norm() const;
  std::string to_json_line(std::size_t step) const;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

// Per-component weights of the training objective after applying the ablation
// mask: total = ce * (CE + CE') + contrastive * (ctr_S + ctr_T) + mmd * MMD.
struct ObjectiveWeights {
  double ce = 0.0;
  double contrastive = 0.0;
  double mmd = 0.0;

  static ObjectiveWeights from(const LossConfig& config, Ablation ablation);
};

struct BatchEmbeddings {
  Matrix source;        // z, b x d_p
  Matrix source_pert;
  Matrix target;
  Matrix target_pert;
  Matrix source_h;      // b x d_h
  Matrix source_pert_h;
  std::vector<double> probs;
  std::vector<double> probs_pert;
  std::vector<int> labels;
};

ContrastiveOptions contrastive_options(const LossConfig& config);

// Components with zero weight are not evaluated and report 0.
LossBreakdown combined_objective(const BatchEmbeddings& batch, const LossConfig& config,
                                 Ablation ablation = Ablation::full);

}  // namespace condet
