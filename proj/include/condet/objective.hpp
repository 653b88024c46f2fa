#pragma once

#include <cstdint>
#include <vector>

#include "condet/corpus.hpp"
#include "condet/encoder.hpp"
#include "condet/losses.hpp"
#include "condet/transform.hpp"

namespace condet {

// Token ids for the four Siamese streams of one paired batch.
struct TokenizedBatch {
  std::vector<std::vector<std::uint32_t>> source;
  std::vector<std::vector<std::uint32_t>> source_pert;
  std::vector<std::vector<std::uint32_t>> target;
  std::vector<std::vector<std::uint32_t>> target_pert;
  std::vector<int> labels;

  std::size_t size() const { return source.size(); }
};

struct BatchTransform {
  const Thesaurus* thesaurus = nullptr;  // required for synonym replacement
  TransformConfig config;                // config.seed is the run-level transform seed
  std::uint64_t epoch = 0;
};

// Seed of the perturbed view of `doc` in `epoch`.
std::uint64_t view_seed(const BatchTransform& transform, const Document& doc);

TokenizedBatch tokenize_batch(const PairedBatch& batch, const TokenizerConfig& tokenizer,
                              const BatchTransform& transform);

struct ObjectiveResult {
  LossBreakdown loss;
  Gradients grads;
};

// Runs every forward pass the active components need with the single shared
// parameter set, evaluates the weighted objective and backpropagates it.
// Contrastive terms are skipped (with a warning) for batches of size 1.
ObjectiveResult loss_and_grads(const TokenizedBatch& batch, const ModelParams& params,
                               const LossConfig& config, Ablation ablation = Ablation::full);

ObjectiveResult loss_and_grads(const PairedBatch& batch, const ModelParams& params,
                               const TokenizerConfig& tokenizer, const BatchTransform& transform,
                               const LossConfig& config, Ablation ablation = Ablation::full);

// Embeddings of all four streams, as fed to combined_objective.
BatchEmbeddings embed_batch(const TokenizedBatch& batch, const ModelParams& params);

}  // namespace condet
