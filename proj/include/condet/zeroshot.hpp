#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace condet {

// Per-token statistics of one document under a proxy language model.
//   logp    : log-probability of the realized token (<= 0)
//   rank    : 1-based rank of the realized token in the next-token
//             distribution; ties are broken by token id ascending
//   entropy : predictive entropy in nats (>= 0)
struct TokenLogProbRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<double> logp;
  std::vector<std::uint64_t> rank;
  std::vector<double> entropy;
};

struct PerturbationRecord {
  std::string id;
  double orig_logp_sum = 0.0;
  std::vector<double> perturbed_logp_sums;
};

// Oriented so that higher means "more likely AI-generated".
struct GltrScores {
  double log_prob = 0.0;  // mean logp
  double rank = 0.0;      // -mean rank
  double log_rank = 0.0;  // -mean ln rank
  double entropy = 0.0;   // -mean entropy
};

GltrScores gltr_scores(const TokenLogProbRecord& record);

// orig - mean(perturbed); the normalized variant divides by the sample
// standard deviation of the perturbed sums, floored at 1e-6.
double detectgpt_score(const PerturbationRecord& record, bool normalized = false);

struct RecordSet {
  std::vector<TokenLogProbRecord> logprob;
  std::vector<PerturbationRecord> perturbation;
};

// Each line is either a logprob record (has "tokens") or a perturbation record
// (has "orig_logp_sum"). Invariants are checked per line.
RecordSet parse_records(std::istream& in, std::string_view source_name = "<stream>");
RecordSet load_records(const std::filesystem::path& path);

std::string to_jsonl(const TokenLogProbRecord& record);
std::string to_jsonl(const PerturbationRecord& record);

}  // namespace condet
