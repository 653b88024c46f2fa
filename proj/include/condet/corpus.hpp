#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace condet {

// label: 0 = human-written, 1 = AI-generated.
struct Document {
  std::string id;
  std::string text;
  std::optional<int> label;
  std::string domain;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class Split { train, val, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

// All documents share one domain tag. `assignment` is either empty (not yet
// split) or parallel to `documents`.
struct Corpus {
  std::string domain;
  std::vector<Document> documents;
  std::vector<Split> assignment;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }
  bool is_split() const { return !documents.empty() && assignment.size() == documents.size(); }
  bool fully_labeled() const;

  // Documents assigned to `split`, in corpus order. Requires is_split().
  Corpus select(Split split) const;
  std::size_t count(Split split) const;
};

Corpus parse_corpus(std::istream& in, std::string_view domain, std::string_view source_name = "<stream>");
Corpus load_corpus(const std::filesystem::path& path, std::string_view domain);

std::string to_jsonl(const Document& doc);
void write_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

SplitFractions parse_fractions(std::string_view text);  // "0.8,0.1,0.1"

// Deterministic in (ids, fractions, seed) and independent of document order:
// documents are ranked by a seeded hash of their id, the first round(val*N)
// go to val, the next round(test*N) to test, the remainder to train.
Corpus split(Corpus corpus, const SplitFractions& fractions, std::uint64_t seed);

struct PairedBatch {
  std::vector<const Document*> source;  // labeled
  std::vector<const Document*> target;  // empty for source-only batches

  std::size_t size() const { return source.size(); }
};

// One epoch over `source_train`, shuffled by (seed, epoch). Target items come
// from an independently shuffled stream that reshuffles and restarts when it
// runs out; the last partial batch is kept and target items match its size.
// The returned batches point into both corpora.
std::vector<PairedBatch> pair_batches(const Corpus& source_train, const Corpus& target_train,
                                      std::size_t batch_size, std::uint64_t seed,
                                      std::uint64_t epoch);

// Same source order as pair_batches, without a target stream.
std::vector<PairedBatch> source_batches(const Corpus& source_train, std::size_t batch_size,
                                        std::uint64_t seed, std::uint64_t epoch);

}  // namespace condet
