#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace condet {

enum class PosTag { noun, verb, adj, adv };

std::string_view to_string(PosTag tag);
std::optional<PosTag> parse_pos_tag(std::string_view name);

// File-backed synonym lexicon keyed on (lowercase word, POS tag).
// Synonym lists are single whitespace-free tokens, deduplicated, and never
// contain the headword; multiword synonyms are dropped at insertion.
class Thesaurus {
 public:
  void add(std::string_view word, PosTag tag, const std::vector<std::string>& synonyms);

  const std::vector<std::string>* synonyms(std::string_view word, PosTag tag) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  // TSV: word<TAB>POS<TAB>syn1,syn2,...
  static Thesaurus parse(std::istream& in, std::string_view source_name = "<stream>");
  static Thesaurus load(const std::filesystem::path& path);
  // Inverse of parse: one line per (word, POS), sorted.
  void write(std::ostream& out) const;

 private:
  std::map<std::pair<std::string, PosTag>, std::vector<std::string>, std::less<>> entries_;
};

enum class TransformKind { synonym_replacement, random_swap, random_crop };

std::string_view to_string(TransformKind kind);
TransformKind parse_transform_kind(std::string_view name);

struct TransformConfig {
  TransformKind kind = TransformKind::synonym_replacement;
  double rate = 0.10;
  std::uint64_t seed = 0;
  double crop_fraction = 0.9;

  void validate() const;
};

// ceil(rate * n), robust to representation error in rate * n.
std::size_t perturb_count(double rate, std::size_t n);

// Lexicon-driven tagging: the tag under which the case-folded word appears,
// preferring NOUN > VERB > ADJ > ADV.
std::optional<PosTag> pos_tag(const Thesaurus& thesaurus, std::string_view word);

// Words are maximal runs of non-whitespace; a sentence ends at a word whose
// last character is '.', '!' or '?'. Whitespace between words is preserved.
//
// Draw order per sentence (sentences in text order), over the n words of the
// sentence that are not punctuation-only:
//   1. k = ceil(rate * n) positions via partial Fisher-Yates over [0, n):
//      for s in 0..k-1: j = s + index(n - s); swap(pos[s], pos[j]); pick pos[s]
//   2. for each picked position in pick order whose word has an entry:
//      one index(|synonyms|) draw selects the replacement.
// Lookup strips leading/trailing punctuation and case-folds; the affixes are
// kept and a leading capital is carried over to the synonym.
std::string synonym_replace(std::string_view text, const Thesaurus& thesaurus,
                            const TransformConfig& config);

// ceil(rate * n) swaps; each draws i = index(n), then j = index(n - 1) shifted
// past i, and exchanges the two words.
std::string random_swap(std::string_view text, const TransformConfig& config);

// Contiguous window of ceil(crop_fraction * n) words starting at index(n - m + 1).
std::string random_crop(std::string_view text, const TransformConfig& config);

std::string apply_transform(std::string_view text, const Thesaurus& thesaurus,
                            const TransformConfig& config);

// Per-document seed: documents transform independently of each other.
std::uint64_t document_seed(std::uint64_t global_seed, std::string_view document_id);

}  // namespace condet
