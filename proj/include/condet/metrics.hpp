#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "condet/corpus.hpp"
#include "condet/encoder.hpp"
#include "condet/losses.hpp"

namespace condet {

// Positive class is AI-generated (label 1) for both F1 and AUROC.
struct ScoredItem {
  std::string id;
  double score = 0.0;
  int label = 0;
};

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion counts;
  bool undefined = false;  // a zero denominator forced the 0 convention
};

// score >= threshold predicts AI.
Confusion confusion(std::span<const ScoredItem> items, double threshold = 0.5);
F1Result f1_from_counts(const Confusion& counts);
F1Result f1_score(std::span<const ScoredItem> items, double threshold = 0.5);
double macro_f1(std::span<const ScoredItem> items, double threshold = 0.5);

// P(random positive outscores random negative), ties count 1/2. Tie-aware rank
// statistic evaluated in integer arithmetic, so it equals the pairwise count
// exactly. Throws on single-class input.
double auroc(std::span<const ScoredItem> items);
double auroc(std::span<const double> scores, std::span<const int> labels);

struct MetricsReport {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> auroc;  // absent for single-class sets
  Confusion counts;
  std::size_t n = 0;
  std::optional<std::uint64_t> seed;
  bool f1_undefined = false;
  bool macro = false;

  nlohmann::ordered_json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

MetricsReport make_report(std::span<const ScoredItem> items, double threshold = 0.5,
                          bool macro = false);

// Probability of the AI class for every document; labels default to 0 when
// absent (use evaluate_model for labeled evaluation).
std::vector<ScoredItem> score_corpus(const ModelParams& params, const Corpus& corpus,
                                     const TokenizerConfig& tokenizer);

struct Evaluation {
  std::vector<ScoredItem> scored;
  MetricsReport report;
};

Evaluation evaluate_model(const ModelParams& params, const Corpus& test_split,
                          const TokenizerConfig& tokenizer, double threshold = 0.5,
                          bool macro = false);

// Mean CE of the classifier on a labeled split.
double mean_ce(const ModelParams& params, const Corpus& labeled, const TokenizerConfig& tokenizer,
               double prob_epsilon);

struct SeedSummary {
  std::vector<MetricsReport> runs;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  std::optional<double> mean_auroc;
  std::optional<double> std_auroc;

  nlohmann::ordered_json to_json() const;
};

SeedSummary summarize(const std::vector<MetricsReport>& runs);

struct ComparisonRow {
  std::string task;
  double source_only_f1 = 0.0;  // percentage points
  double conda_f1 = 0.0;
  double delta_f1 = 0.0;
};

// delta in percentage points: 100 * (conda.f1 - source_only.f1).
ComparisonRow compare_runs(const MetricsReport& source_only, const MetricsReport& conda,
                           std::string task = "");

std::string format_comparison(const std::vector<ComparisonRow>& rows);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

// Variant x target grid of (F1, AUROC) cells: one row per model variant
// (ConDA\CEs, ConDA\contrast, ConDA\MMD, ConDA), two columns per target.
struct AblationTable {
  std::vector<std::string> targets;
  struct Row {
    Ablation variant = Ablation::full;
    std::vector<SeedSummary> cells;  // one per target
  };
  std::vector<Row> rows;
};

std::string variant_label(Ablation ablation);
std::string format_ablation_table(const AblationTable& table);
std::string ablation_csv(const AblationTable& table);

// CSV: id,domain,label,h0..h{d_h-1},z0..z{d_p-1}; empty label cell when absent.
void export_embeddings(const ModelParams& params, const Corpus& corpus,
                       const TokenizerConfig& tokenizer, std::ostream& out);
void export_embeddings(const ModelParams& params, const Corpus& corpus,
                       const TokenizerConfig& tokenizer, const std::filesystem::path& path);

// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace condet
