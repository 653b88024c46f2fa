#include "condet/zeroshot.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "condet/error.hpp"

namespace condet {
namespace {

using json = nlohmann::json;

constexpr double kLogpTolerance = 1e-9;

[[noreturn]] void fail(std::string_view source, std::size_t line, const std::string& what) {
  throw DataError(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

std::vector<double> number_array(const json& j, const char* key, std::string_view src, std::size_t line) {
  if (!j.contains(key) || !j[key].is_array()) fail(src, line, std::string("\"") + key + "\" must be an array");
  std::vector<double> out;
  for (const auto& v : j[key]) {
    if (!v.is_number()) fail(src, line, std::string("\"") + key + "\" must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

TokenLogProbRecord parse_logprob(const json& j, std::string_view src, std::size_t line) {
  TokenLogProbRecord r;
  r.id = j["id"].get<std::string>();
  if (!j["tokens"].is_array()) fail(src, line, "\"tokens\" must be an array");
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) fail(src, line, "\"tokens\" must hold strings");
    r.tokens.push_back(t.get<std::string>());
  }
  r.logp = number_array(j, "logp", src, line);
  r.entropy = number_array(j, "entropy", src, line);
  if (!j.contains("rank") || !j["rank"].is_array()) fail(src, line, "\"rank\" must be an array");
  for (const auto& v : j["rank"]) {
    if (!v.is_number_integer()) fail(src, line, "\"rank\" must hold integers");
    const auto rank = v.get<std::int64_t>();
    if (rank < 1) fail(src, line, "rank must be >= 1, got " + std::to_string(rank));
    r.rank.push_back(static_cast<std::uint64_t>(rank));
  }
  const std::size_t n = r.tokens.size();
  if (r.logp.size() != n || r.rank.size() != n || r.entropy.size() != n) {
    fail(src, line, "tokens, logp, rank and entropy lengths differ");
  }
  for (double lp : r.logp) {
    if (!std::isfinite(lp) || lp > kLogpTolerance) fail(src, line, "logp must be <= 0");
  }
  for (double e : r.entropy) {
    if (!std::isfinite(e) || e < -kLogpTolerance) fail(src, line, "entropy must be >= 0");
  }
  return r;
}

PerturbationRecord parse_perturbation(const json& j, std::string_view src, std::size_t line) {
  PerturbationRecord r;
  r.id = j["id"].get<std::string>();
  if (!j["orig_logp_sum"].is_number()) fail(src, line, "\"orig_logp_sum\" must be a number");
  r.orig_logp_sum = j["orig_logp_sum"].get<double>();
  r.perturbed_logp_sums = number_array(j, "perturbed_logp_sums", src, line);
  if (r.perturbed_logp_sums.empty()) fail(src, line, "\"perturbed_logp_sums\" must not be empty");
  return r;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

GltrScores gltr_scores(const TokenLogProbRecord& r) {
  const std::size_t n = r.tokens.size();
  if (n == 0) throw DataError("gltr_scores: record '" + r.id + "' has no tokens");
  if (r.logp.size() != n || r.rank.size() != n || r.entropy.size() != n) {
    throw DataError("gltr_scores: record '" + r.id + "' has mismatched list lengths");
  }
  double sum_logp = 0.0, sum_rank = 0.0, sum_log_rank = 0.0, sum_entropy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_logp += r.logp[i];
    sum_rank += static_cast<double>(r.rank[i]);
    sum_log_rank += std::log(static_cast<double>(r.rank[i]));
    sum_entropy += r.entropy[i];
  }
  const double inv = 1.0 / static_cast<double>(n);
  return {sum_logp * inv, -sum_rank * inv, -sum_log_rank * inv, -sum_entropy * inv};
}

double detectgpt_score(const PerturbationRecord& r, bool normalized) {
  const auto& p = r.perturbed_logp_sums;
  if (p.empty()) throw DataError("detectgpt_score: record '" + r.id + "' has no perturbations");
  const double mu = mean(p);
  const double raw = r.orig_logp_sum - mu;
  if (!normalized) return raw;
  if (p.size() < 2) throw DataError("detectgpt_score: normalized score needs at least 2 perturbations");
  double ss = 0.0;
  for (double v : p) ss += (v - mu) * (v - mu);
  const double sd = std::sqrt(ss / static_cast<double>(p.size() - 1));
  return raw / std::max(sd, 1e-6);
}

RecordSet parse_records(std::istream& in, std::string_view source_name) {
  RecordSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) fail(source_name, line_no, "empty line");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(source_name, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      fail(source_name, line_no, "record needs a string \"id\"");
    }
    if (j.contains("tokens")) {
      out.logprob.push_back(parse_logprob(j, source_name, line_no));
    } else if (j.contains("orig_logp_sum")) {
      out.perturbation.push_back(parse_perturbation(j, source_name, line_no));
    } else {
      fail(source_name, line_no, "neither a logprob nor a perturbation record");
    }
  }
  return out;
}

RecordSet load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open record file " + path.string());
  return parse_records(in, path.string());
}

std::string to_jsonl(const TokenLogProbRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["tokens"] = r.tokens;
  j["logp"] = r.logp;
  j["rank"] = r.rank;
  j["entropy"] = r.entropy;
  return j.dump();
}

std::string to_jsonl(const PerturbationRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["orig_logp_sum"] = r.orig_logp_sum;
  j["perturbed_logp_sums"] = r.perturbed_logp_sums;
  return j.dump();
}

}  // namespace condet
