#include "condet/transform.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "condet/error.hpp"
#include "condet/log.hpp"
#include "condet/random.hpp"

namespace condet {
namespace {

constexpr std::array<PosTag, 4> kTagPriority = {PosTag::noun, PosTag::verb, PosTag::adj,
                                                 PosTag::adv};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct Span {
  std::size_t begin;
  std::size_t end;
};

std::vector<Span> word_spans(std::string_view text) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    spans.push_back({start, i});
  }
  return spans;
}

bool ends_sentence(std::string_view word) {
  const char last = word.back();
  return last == '.' || last == '!' || last == '?';
}

// [first, last) ranges of word indices.
std::vector<std::pair<std::size_t, std::size_t>> sentences(std::string_view text,
                                                           const std::vector<Span>& words) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t start = 0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (ends_sentence(text.substr(words[w].begin, words[w].end - words[w].begin))) {
      out.emplace_back(start, w + 1);
      start = w + 1;
    }
  }
  if (start < words.size()) out.emplace_back(start, words.size());
  return out;
}

bool single_token(std::string_view s) {
  return !s.empty() && std::none_of(s.begin(), s.end(), [](char c) { return is_space(c) || c == '_'; });
}

}  // namespace

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::noun: return "NOUN";
    case PosTag::verb: return "VERB";
    case PosTag::adj: return "ADJ";
    case PosTag::adv: return "ADV";
  }
  return "NOUN";
}

std::optional<PosTag> parse_pos_tag(std::string_view name) {
  for (PosTag tag : kTagPriority) {
    if (to_string(tag) == name) return tag;
  }
  return std::nullopt;
}

void Thesaurus::add(std::string_view word, PosTag tag, const std::vector<std::string>& synonyms) {
  const std::string head = lowercase(word);
  if (!single_token(head)) return;
  auto& list = entries_[{head, tag}];
  for (const auto& raw : synonyms) {
    std::string syn = lowercase(raw);
    if (!single_token(syn) || syn == head) continue;
    if (std::find(list.begin(), list.end(), syn) == list.end()) list.push_back(std::move(syn));
  }
  if (list.empty()) entries_.erase({head, tag});
}

const std::vector<std::string>* Thesaurus::synonyms(std::string_view word, PosTag tag) const {
  auto it = entries_.find(std::make_pair(std::string(word), tag));
  return it == entries_.end() ? nullptr : &it->second;
}

Thesaurus Thesaurus::parse(std::istream& in, std::string_view source_name) {
  Thesaurus thesaurus;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream row(line);
    while (std::getline(row, field, '\t')) fields.push_back(field);
    if (fields.size() != 3) {
      throw DataError(std::string(source_name) + ":" + std::to_string(line_no) +
                      ": expected word<TAB>POS<TAB>synonyms");
    }
    const auto tag = parse_pos_tag(fields[1]);
    if (!tag) {
      throw DataError(std::string(source_name) + ":" + std::to_string(line_no) +
                      ": unknown POS tag '" + fields[1] + "'");
    }
    std::vector<std::string> synonyms;
    std::istringstream list(fields[2]);
    while (std::getline(list, field, ',')) {
      if (single_token(field)) {
        synonyms.push_back(field);
      } else {
        ++dropped;
      }
    }
    thesaurus.add(fields[0], *tag, synonyms);
  }
  if (dropped > 0) {
    log::debug(std::string(source_name) + ": dropped " + std::to_string(dropped) +
               " multiword synonyms");
  }
  return thesaurus;
}

Thesaurus Thesaurus::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open thesaurus " + path.string());
  return parse(in, path.string());
}

void Thesaurus::write(std::ostream& out) const {
  for (const auto& [key, list] : entries_) {
    out << key.first << '\t' << to_string(key.second) << '\t';
    for (std::size_t i = 0; i < list.size(); ++i) out << (i ? "," : "") << list[i];
    out << '\n';
  }
}

std::string_view to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::synonym_replacement: return "synonym";
    case TransformKind::random_swap: return "swap";
    case TransformKind::random_crop: return "crop";
  }
  return "synonym";
}

TransformKind parse_transform_kind(std::string_view name) {
  if (name == "synonym" || name == "synonym_replacement") return TransformKind::synonym_replacement;
  if (name == "swap" || name == "random_swap") return TransformKind::random_swap;
  if (name == "crop" || name == "random_crop") return TransformKind::random_crop;
  throw UsageError("unknown transform kind '" + std::string(name) + "'");
}

void TransformConfig::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) throw UsageError("transform rate must lie in [0, 1]");
  if (!(crop_fraction > 0.0 && crop_fraction <= 1.0)) {
    throw UsageError("crop fraction must lie in (0, 1]");
  }
}

std::size_t perturb_count(double rate, std::size_t n) {
  const double raw = rate * static_cast<double>(n);
  const auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(k, n);
}

std::optional<PosTag> pos_tag(const Thesaurus& thesaurus, std::string_view word) {
  const std::string key = lowercase(word);
  for (PosTag tag : kTagPriority) {
    if (thesaurus.synonyms(key, tag) != nullptr) return tag;
  }
  return std::nullopt;
}

std::string synonym_replace(std::string_view text, const Thesaurus& thesaurus,
                            const TransformConfig& config) {
  config.validate();
  const auto words = word_spans(text);
  std::vector<std::string> replacement(words.size());
  std::vector<bool> replaced(words.size(), false);
  Rng rng(config.seed);

  for (const auto& [first, last] : sentences(text, words)) {
    // Punctuation-only tokens such as a detached "." are not words.
    std::vector<std::size_t> positions;
    for (std::size_t w = first; w < last; ++w) {
      const auto word = text.substr(words[w].begin, words[w].end - words[w].begin);
      if (!std::all_of(word.begin(), word.end(), is_punct)) positions.push_back(w);
    }
    const std::size_t n = positions.size();
    const std::size_t k = perturb_count(config.rate, n);
    if (k == 0) continue;
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t j = s + rng.index(n - s);
      std::swap(positions[s], positions[j]);
    }
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t w = positions[s];
      const std::string_view word = text.substr(words[w].begin, words[w].end - words[w].begin);
      std::size_t lead = 0;
      while (lead < word.size() && is_punct(word[lead])) ++lead;
      std::size_t trail = word.size();
      while (trail > lead && is_punct(word[trail - 1])) --trail;
      if (lead == trail) continue;
      const std::string_view core = word.substr(lead, trail - lead);
      const auto tag = pos_tag(thesaurus, core);
      if (!tag) continue;
      const auto* options = thesaurus.synonyms(lowercase(core), *tag);
      std::string pick = (*options)[rng.index(options->size())];
      if (std::isupper(static_cast<unsigned char>(core.front())) != 0) {
        pick.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(pick.front())));
      }
      replacement[w] = std::string(word.substr(0, lead)) + pick + std::string(word.substr(trail));
      replaced[w] = true;
    }
  }

  std::string out;
  out.reserve(text.size());
  std::size_t cursor = 0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    out.append(text.substr(cursor, words[w].begin - cursor));
    if (replaced[w]) {
      out.append(replacement[w]);
    } else {
      out.append(text.substr(words[w].begin, words[w].end - words[w].begin));
    }
    cursor = words[w].end;
  }
  out.append(text.substr(cursor));
  return out;
}

std::string random_swap(std::string_view text, const TransformConfig& config) {
  config.validate();
  const auto words = word_spans(text);
  const std::size_t n = words.size();
  if (n < 2) {
    if (config.rate > 0) log::warn("random_swap: fewer than two words, text left unchanged");
    return std::string(text);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  const std::size_t swaps = perturb_count(config.rate, n);
  for (std::size_t s = 0; s < swaps; ++s) {
    const std::size_t i = rng.index(n);
    std::size_t j = rng.index(n - 1);
    if (j >= i) ++j;
    std::swap(order[i], order[j]);
  }
  std::string out;
  out.reserve(text.size());
  std::size_t cursor = 0;
  for (std::size_t w = 0; w < n; ++w) {
    out.append(text.substr(cursor, words[w].begin - cursor));
    const Span& src = words[order[w]];
    out.append(text.substr(src.begin, src.end - src.begin));
    cursor = words[w].end;
  }
  out.append(text.substr(cursor));
  return out;
}

std::string random_crop(std::string_view text, const TransformConfig& config) {
  config.validate();
  const auto words = word_spans(text);
  const std::size_t n = words.size();
  if (n == 0) throw DataError("random_crop: empty text");
  const std::size_t m = std::max<std::size_t>(1, perturb_count(config.crop_fraction, n));
  if (m == n) return std::string(text);
  Rng rng(config.seed);
  const std::size_t start = rng.index(n - m + 1);
  const std::size_t begin = words[start].begin;
  const std::size_t end = words[start + m - 1].end;
  return std::string(text.substr(begin, end - begin));
}

std::string apply_transform(std::string_view text, const Thesaurus& thesaurus,
                            const TransformConfig& config) {
  switch (config.kind) {
    case TransformKind::synonym_replacement: return synonym_replace(text, thesaurus, config);
    case TransformKind::random_swap: return random_swap(text, config);
    case TransformKind::random_crop: return random_crop(text, config);
  }
  return std::string(text);
}

std::uint64_t document_seed(std::uint64_t global_seed, std::string_view document_id) {
  return mix_seed(global_seed, fnv1a64(document_id));
}

}  // namespace condet
