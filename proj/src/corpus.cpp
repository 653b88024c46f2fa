#include "condet/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "condet/error.hpp"
#include "condet/log.hpp"
#include "condet/random.hpp"

namespace condet {
namespace {

using ordered_json = nlohmann::ordered_json;

bool blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

[[noreturn]] void fail_line(std::string_view source, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << source << ":" << line << ": " << what;
  throw DataError(msg.str());
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  return order;
}

std::vector<std::vector<std::size_t>> chunk_source(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed, std::uint64_t epoch) {
  if (n == 0) throw DataError("pair_batches: source train split is empty");
  if (batch_size == 0) throw UsageError("pair_batches: batch size must be >= 1");
  if (batch_size > n) {
    throw UsageError("pair_batches: batch size " + std::to_string(batch_size) +
                     " exceeds source train size " + std::to_string(n));
  }
  const auto order = shuffled_indices(n, mix_seed(mix_seed(seed, "source"), epoch));
  std::vector<std::vector<std::size_t>> chunks;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    chunks.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                        order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return chunks;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw UsageError("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

bool Corpus::fully_labeled() const {
  return std::all_of(documents.begin(), documents.end(),
                     [](const Document& d) { return d.label.has_value(); });
}

Corpus Corpus::select(Split which) const {
  if (!is_split()) throw UsageError("corpus '" + domain + "' has no split assignment");
  Corpus out;
  out.domain = domain;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (assignment[i] == which) {
      out.documents.push_back(documents[i]);
      out.assignment.push_back(which);
    }
  }
  return out;
}

std::size_t Corpus::count(Split which) const {
  return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), which));
}

Corpus parse_corpus(std::istream& in, std::string_view domain, std::string_view source_name) {
  Corpus corpus;
  corpus.domain = std::string(domain);
  std::unordered_set<std::string> seen;
  bool warned_unknown = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) fail_line(source_name, line_no, "empty line");

    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail_line(source_name, line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object()) fail_line(source_name, line_no, "record is not a JSON object");

    Document doc;
    for (const auto& [key, value] : record.items()) {
      if (key == "id") {
        if (!value.is_string()) fail_line(source_name, line_no, "\"id\" must be a string");
        doc.id = value.get<std::string>();
      } else if (key == "text") {
        if (!value.is_string()) fail_line(source_name, line_no, "\"text\" must be a string");
        doc.text = value.get<std::string>();
      } else if (key == "label") {
        if (!value.is_number_integer() ||
            (value.get<std::int64_t>() != 0 && value.get<std::int64_t>() != 1)) {
          fail_line(source_name, line_no, "\"label\" must be 0 or 1, got " + value.dump());
        }
        doc.label = static_cast<int>(value.get<std::int64_t>());
      } else if (key == "domain") {
        if (!value.is_string()) fail_line(source_name, line_no, "\"domain\" must be a string");
      } else if (!warned_unknown) {
        log::warn(std::string(source_name) + ":" + std::to_string(line_no) +
                  ": ignoring unknown key \"" + key + "\" (further unknown keys not reported)");
        warned_unknown = true;
      }
    }
    if (!record.contains("id")) fail_line(source_name, line_no, "missing \"id\"");
    if (!record.contains("text")) fail_line(source_name, line_no, "missing \"text\"");
    if (blank(doc.text)) fail_line(source_name, line_no, "empty text for id '" + doc.id + "'");
    if (!seen.insert(doc.id).second) {
      fail_line(source_name, line_no, "duplicate id '" + doc.id + "'");
    }
    doc.domain = corpus.domain;
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, std::string_view domain) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return parse_corpus(in, domain, path.string());
}

std::string to_jsonl(const Document& doc) {
  ordered_json record;
  record["id"] = doc.id;
  record["text"] = doc.text;
  if (doc.label) record["label"] = *doc.label;
  record["domain"] = doc.domain;
  return record.dump();
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& doc : corpus.documents) out << to_jsonl(doc) << '\n';
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  write_corpus(corpus, out);
}

SplitFractions parse_fractions(std::string_view text) {
  std::vector<double> parts;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("invalid split fraction '" + item + "'");
    }
  }
  if (parts.size() != 3) throw UsageError("expected three comma-separated split fractions");
  return {parts[0], parts[1], parts[2]};
}

Corpus split(Corpus corpus, const SplitFractions& f, std::uint64_t seed) {
  if (corpus.empty()) throw DataError("cannot split an empty corpus");
  if (f.train < 0 || f.val < 0 || f.test < 0 ||
      std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw UsageError("split fractions must be nonnegative and sum to 1");
  }
  const std::size_t n = corpus.size();
  auto rounded = [n](double fraction) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  };
  const std::size_t n_val = std::min(n, rounded(f.val));
  const std::size_t n_test = std::min(n - n_val, rounded(f.test));
  const std::size_t n_train = n - n_val - n_test;
  if (n >= 3) {
    const auto check = [](double fraction, std::size_t count, std::string_view name) {
      if (fraction > 0 && count == 0) {
        throw DataError("split '" + std::string(name) + "' would receive no documents");
      }
    };
    check(f.train, n_train, "train");
    check(f.val, n_val, "val");
    check(f.test, n_test, "test");
  }

  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(n);
  for (std::size_t i = 0; i < n; ++i) {
    keyed[i] = {mix_seed(seed, fnv1a64(corpus.documents[i].id)), i};
  }
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return corpus.documents[a.second].id < corpus.documents[b.second].id;
  });
  corpus.assignment.assign(n, Split::train);
  for (std::size_t rank = 0; rank < n_val; ++rank) corpus.assignment[keyed[rank].second] = Split::val;
  for (std::size_t rank = n_val; rank < n_val + n_test; ++rank) {
    corpus.assignment[keyed[rank].second] = Split::test;
  }
  return corpus;
}

std::vector<PairedBatch> source_batches(const Corpus& source_train, std::size_t batch_size,
                                        std::uint64_t seed, std::uint64_t epoch) {
  std::vector<PairedBatch> batches;
  for (const auto& chunk : chunk_source(source_train.size(), batch_size, seed, epoch)) {
    PairedBatch batch;
    for (std::size_t i : chunk) batch.source.push_back(&source_train.documents[i]);
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<PairedBatch> pair_batches(const Corpus& source_train, const Corpus& target_train,
                                      std::size_t batch_size, std::uint64_t seed,
                                      std::uint64_t epoch) {
  if (target_train.empty()) throw DataError("pair_batches: target train split is empty");
  auto batches = source_batches(source_train, batch_size, seed, epoch);

  const std::uint64_t target_seed = mix_seed(mix_seed(seed, "target"), epoch);
  std::uint64_t cycle = 0;
  auto stream = shuffled_indices(target_train.size(), mix_seed(target_seed, cycle));
  std::size_t cursor = 0;
  for (auto& batch : batches) {
    while (batch.target.size() < batch.source.size()) {
      if (cursor == stream.size()) {
        ++cycle;
        stream = shuffled_indices(target_train.size(), mix_seed(target_seed, cycle));
        cursor = 0;
      }
      batch.target.push_back(&target_train.documents[stream[cursor++]]);
    }
  }
  return batches;
}

}  // namespace condet
