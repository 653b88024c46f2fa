#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "condet/corpus.hpp"
#include "condet/encoder.hpp"
#include "condet/losses.hpp"
#include "condet/metrics.hpp"
#include "condet/optim.hpp"
#include "condet/transform.hpp"

namespace condet {

// reference: lr 2e-5, the rate suited to large pretrained encoders.
// scratch: lr 1e-3, for the small from-scratch encoder.
enum class Preset { reference, scratch };

Preset parse_preset(std::string_view name);

struct TrainConfig {
  double learning_rate = 2e-5;
  std::size_t epochs = 5;
  std::size_t batch_size = 16;
  double weight_decay = 0.0;
  std::size_t patience = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  LossConfig loss;
  Ablation ablation = Ablation::full;
  ModelDims dims;
  TokenizerConfig tokenizer;
  TransformConfig transform;

  static TrainConfig preset(Preset preset);

  void validate() const;
  nlohmann::ordered_json to_json() const;
  // Overlays the keys present in `j` onto `base`; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig load(const std::filesystem::path& path, TrainConfig base);
  static TrainConfig load(const std::filesystem::path& path);
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double val_ce = 0.0;
  bool improved = false;
};

struct TrainRunResult {
  ModelParams params;   // best validation epoch
  AdamState optimizer;  // optimizer state at that epoch
  std::vector<EpochRecord> history;
  std::vector<LossBreakdown> steps;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  double wall_seconds = 0.0;
  std::filesystem::path checkpoint;
};

// `source` must carry a split assignment with non-empty train and val splits.
// The target train split is used when `target` is split, otherwise all of it;
// target labels are never read. Stops when source-validation CE fails to
// improve for `patience` consecutive epochs.
TrainRunResult train(const Corpus& source, const Corpus& target, std::uint64_t seed,
                     const TrainConfig& config, const Thesaurus& thesaurus);

// The same loop with contrastive and MMD terms removed and no target stream.
TrainRunResult train_source_only(const Corpus& source, std::uint64_t seed,
                                 const TrainConfig& config, const Thesaurus& thesaurus);

// Writes model.cnda, state.cnda (with optimizer moments), train_log.jsonl and
// history.json into `dir` and records the checkpoint path in `run`.
void write_run(TrainRunResult& run, const std::filesystem::path& dir);

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<TrainRunResult> run;
  std::string error;
  bool numerical_failure = false;
  std::optional<MetricsReport> source_test;
  std::optional<MetricsReport> target_test;
};

struct SeedSweep {
  std::vector<SeedOutcome> outcomes;
  std::optional<SeedSummary> source_summary;
  std::optional<SeedSummary> target_summary;

  nlohmann::ordered_json to_json() const;
};

// One run per config.seeds entry (in parallel up to `threads`). A failing seed
// is recorded and does not stop the others. Evaluates on the source test split
// and, when the target is split and labeled, on the target test split.
SeedSweep run_seeds(const Corpus& source, const Corpus* target, const TrainConfig& config,
                    const Thesaurus& thesaurus, std::size_t threads = 1);

}  // namespace condet
