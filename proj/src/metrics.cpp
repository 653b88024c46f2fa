#include "condet/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "condet/error.hpp"

namespace condet {
namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

// Identical values summarize to themselves with zero spread.
double mean_of(const std::vector<double>& v) {
  if (std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end()) return v.front();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mu) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

Confusion confusion(std::span<const ScoredItem> items, double threshold) {
  Confusion c;
  for (const auto& item : items) {
    const bool predicted = item.score >= threshold;
    const bool actual = item.label == 1;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

F1Result f1_from_counts(const Confusion& c) {
  F1Result r;
  r.counts = c;
  const double tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) r.precision = tp / static_cast<double>(c.tp + c.fp);
  else r.undefined = true;
  if (c.tp + c.fn > 0) r.recall = tp / static_cast<double>(c.tp + c.fn);
  else r.undefined = true;
  if (r.precision + r.recall > 0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  } else {
    r.f1 = 0.0;
    r.undefined = true;
  }
  return r;
}

F1Result f1_score(std::span<const ScoredItem> items, double threshold) {
  if (items.empty()) throw DataError("f1_score: empty set");
  return f1_from_counts(confusion(items, threshold));
}

double macro_f1(std::span<const ScoredItem> items, double threshold) {
  const Confusion c = f1_score(items, threshold).counts;
  const Confusion flipped{c.tn, c.fn, c.tp, c.fp};
  return 0.5 * (f1_from_counts(c).f1 + f1_from_counts(flipped).f1);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw UsageError("auroc: score and label counts differ");
  const std::size_t n = scores.size();
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(scores[i])) throw DataError("auroc: NaN score");
    if (labels[i] == 1) ++positives;
  }
  const std::uint64_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw DataError("auroc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the midrank of a tie group occupying sorted slots [i, j) is i + 1 + j.
  std::uint64_t rank_sum_x2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t midrank_x2 = i + 1 + j;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_x2 += midrank_x2;
    }
    i = j;
  }
  // 2U = 2 * (sum of positive ranks) - P(P + 1)
  const std::uint64_t u_x2 = rank_sum_x2 - positives * (positives + 1);
  return static_cast<double>(u_x2) / static_cast<double>(2 * positives * negatives);
}

double auroc(std::span<const ScoredItem> items) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& item : items) {
    scores.push_back(item.score);
    labels.push_back(item.label);
  }
  return auroc(scores, labels);
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["f1"] = f1;
  j["precision"] = precision;
  j["recall"] = recall;
  j["auroc"] = auroc ? nlohmann::ordered_json(*auroc) : nlohmann::ordered_json(nullptr);
  j["tp"] = counts.tp;
  j["fp"] = counts.fp;
  j["tn"] = counts.tn;
  j["fn"] = counts.fn;
  j["n"] = n;
  j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
  j["f1_undefined"] = f1_undefined;
  j["f1_average"] = macro ? "macro" : "binary";
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.f1 = j.at("f1").get<double>();
    r.precision = j.value("precision", 0.0);
    r.recall = j.value("recall", 0.0);
    if (j.contains("auroc") && !j["auroc"].is_null()) r.auroc = j["auroc"].get<double>();
    r.counts = {j.value("tp", std::size_t{0}), j.value("fp", std::size_t{0}),
                j.value("tn", std::size_t{0}), j.value("fn", std::size_t{0})};
    r.n = j.value("n", std::size_t{0});
    if (j.contains("seed") && !j["seed"].is_null()) r.seed = j["seed"].get<std::uint64_t>();
    r.f1_undefined = j.value("f1_undefined", false);
    r.macro = j.value("f1_average", std::string("binary")) == "macro";
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metrics report: ") + e.what());
  }
}

MetricsReport make_report(std::span<const ScoredItem> items, double threshold, bool macro) {
  const F1Result f = f1_score(items, threshold);
  MetricsReport r;
  r.f1 = macro ? macro_f1(items, threshold) : f.f1;
  r.precision = f.precision;
  r.recall = f.recall;
  r.counts = f.counts;
  r.f1_undefined = f.undefined;
  r.macro = macro;
  r.n = items.size();
  const bool both = f.counts.tp + f.counts.fn > 0 && f.counts.tn + f.counts.fp > 0;
  if (both) r.auroc = auroc(items);
  return r;
}

std::vector<ScoredItem> score_corpus(const ModelParams& params, const Corpus& corpus,
                                     const TokenizerConfig& tokenizer) {
  std::vector<ScoredItem> out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus.documents) {
    const auto h = encode(tokenize(doc.text, tokenizer), params);
    out.push_back({doc.id, classify(h, params), doc.label.value_or(0)});
  }
  return out;
}

Evaluation evaluate_model(const ModelParams& params, const Corpus& test_split,
                          const TokenizerConfig& tokenizer, double threshold, bool macro) {
  if (test_split.empty()) throw DataError("evaluate_model: empty evaluation split");
  for (const auto& doc : test_split.documents) {
    if (!doc.label) throw DataError("evaluate_model: document '" + doc.id + "' has no label");
  }
  Evaluation e;
  e.scored = score_corpus(params, test_split, tokenizer);
  e.report = make_report(e.scored, threshold, macro);
  return e;
}

double mean_ce(const ModelParams& params, const Corpus& labeled, const TokenizerConfig& tokenizer,
               double prob_epsilon) {
  std::vector<double> probs;
  std::vector<int> labels;
  for (const auto& item : score_corpus(params, labeled, tokenizer)) {
    probs.push_back(item.score);
    labels.push_back(item.label);
  }
  return ce_loss(probs, labels, prob_epsilon);
}

nlohmann::ordered_json SeedSummary::to_json() const {
  nlohmann::ordered_json j;
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : runs) j["runs"].push_back(r.to_json());
  j["mean_f1"] = mean_f1;
  j["std_f1"] = std_f1;
  j["mean_auroc"] = mean_auroc ? nlohmann::ordered_json(*mean_auroc) : nlohmann::ordered_json(nullptr);
  j["std_auroc"] = std_auroc ? nlohmann::ordered_json(*std_auroc) : nlohmann::ordered_json(nullptr);
  return j;
}

SeedSummary summarize(const std::vector<MetricsReport>& runs) {
  if (runs.empty()) throw UsageError("summarize: no runs");
  SeedSummary s;
  s.runs = runs;
  std::vector<double> f1s, aucs;
  for (const auto& r : runs) {
    f1s.push_back(r.f1);
    if (r.auroc) aucs.push_back(*r.auroc);
  }
  s.mean_f1 = mean_of(f1s);
  s.std_f1 = std_of(f1s, s.mean_f1);
  if (aucs.size() == runs.size()) {
    s.mean_auroc = mean_of(aucs);
    s.std_auroc = std_of(aucs, *s.mean_auroc);
  }
  return s;
}

ComparisonRow compare_runs(const MetricsReport& source_only, const MetricsReport& conda, std::string task) {
  ComparisonRow row;
  row.task = std::move(task);
  row.source_only_f1 = 100.0 * source_only.f1;
  row.conda_f1 = 100.0 * conda.f1;
  row.delta_f1 = 100.0 * (conda.f1 - source_only.f1);
  return row;
}

std::string format_comparison(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Task" << std::right << std::setw(12) << "Source-only"
      << std::setw(10) << "ConDA" << std::setw(10) << "dF1" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(16) << (r.task.empty() ? "-" : r.task) << std::right
        << std::setw(12) << fixed(r.source_only_f1, 1) << std::setw(10) << fixed(r.conda_f1, 1)
        << std::setw(10) << fixed(r.delta_f1, 1) << '\n';
  }
  return out.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "task,source_only_f1,conda_f1,delta_f1\n";
  for (const auto& r : rows) {
    out << csv_field(r.task) << ',' << format_double(r.source_only_f1) << ','
        << format_double(r.conda_f1) << ',' << format_double(r.delta_f1) << '\n';
  }
  return out.str();
}

std::string variant_label(Ablation ablation) {
  switch (ablation) {
    case Ablation::no_ce: return "ConDA\\CEs";
    case Ablation::no_contrast: return "ConDA\\contrast";
    case Ablation::no_mmd: return "ConDA\\MMD";
    case Ablation::source_only: return "Source-only";
    case Ablation::full: return "ConDA";
  }
  return "ConDA";
}

std::string format_ablation_table(const AblationTable& table) {
  std::ostringstream out;
  out << std::left << std::setw(18) << "Model variant";
  for (const auto& t : table.targets) out << std::right << std::setw(20) << t;
  out << '\n' << std::left << std::setw(18) << "";
  for (std::size_t i = 0; i < table.targets.size(); ++i) {
    out << std::right << std::setw(10) << "F1" << std::setw(10) << "AUROC";
  }
  out << '\n';
  for (const auto& row : table.rows) {
    out << std::left << std::setw(18) << variant_label(row.variant);
    for (const auto& cell : row.cells) {
      out << std::right << std::setw(10) << fixed(100.0 * cell.mean_f1, 1) << std::setw(10)
          << (cell.mean_auroc ? fixed(*cell.mean_auroc, 4) : std::string("-"));
    }
    out << '\n';
  }
  return out.str();
}

std::string ablation_csv(const AblationTable& table) {
  std::ostringstream out;
  out << "variant";
  for (const auto& t : table.targets) out << ',' << csv_field(t + "_f1") << ',' << csv_field(t + "_auroc");
  out << '\n';
  for (const auto& row : table.rows) {
    out << csv_field(variant_label(row.variant));
    for (const auto& cell : row.cells) {
      out << ',' << format_double(100.0 * cell.mean_f1) << ','
          << (cell.mean_auroc ? format_double(*cell.mean_auroc) : std::string());
    }
    out << '\n';
  }
  return out.str();
}

void export_embeddings(const ModelParams& params, const Corpus& corpus,
                       const TokenizerConfig& tokenizer, std::ostream& out) {
  const auto& d = params.dims();
  out << "id,domain,label";
  for (std::size_t i = 0; i < d.hidden; ++i) out << ",h" << i;
  for (std::size_t i = 0; i < d.proj; ++i) out << ",z" << i;
  out << '\n';
  for (const auto& doc : corpus.documents) {
    const auto h = encode(tokenize(doc.text, tokenizer), params);
    const auto z = project(h, params);
    out << csv_field(doc.id) << ',' << csv_field(doc.domain) << ',';
    if (doc.label) out << *doc.label;
    for (double v : h) out << ',' << format_double(v);
    for (double v : z) out << ',' << format_double(v);
    out << '\n';
  }
}

void export_embeddings(const ModelParams& params, const Corpus& corpus,
                       const TokenizerConfig& tokenizer, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embeddings to " + path.string());
  export_embeddings(params, corpus, tokenizer, out);
  if (!out) throw DataError("failed writing embeddings to " + path.string());
}

}  // namespace condet
