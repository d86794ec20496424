// ctcadapt/targets.hpp

// Copyright 2026 The ctcadapt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "ctcadapt/numerics.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctcadapt {

using UnitId = int;
using WordSeq = std::vector<std::string>;

enum class VocabKind { kLetter, kWord, kMixUnit };

inline std::string_view ToString(VocabKind k) {
  switch (k) {
    case VocabKind::kLetter: return "letter";
    case VocabKind::kWord: return "word";
    case VocabKind::kMixUnit: return "mixunit";
  }
  return "?";
}

inline VocabKind ParseVocabKind(std::string_view s) {
  if (s == "letter") return VocabKind::kLetter;
  if (s == "word") return VocabKind::kWord;
  if (s == "mixunit" || s == "mix-unit" || s == "mix") return VocabKind::kMixUnit;
  throw Error("unknown vocabulary kind: " + std::string(s));
}

inline constexpr std::string_view kBlankSymbol = "<blk>";
inline constexpr std::string_view kSpaceSymbol = "$";
inline constexpr std::string_view kOovSymbol = "<unk>";
/// Characters a letter model can emit, besides "$" and blank.
inline constexpr std::string_view kLetterChars = "abcdefghijklmnopqrstuvwxyz'*";

/// A collapsed target sequence: unit ids with no blanks. Adjacent duplicates
/// are genuine repeats.
struct LabelSequence {
  std::vector<UnitId> ids;
  VocabKind kind = VocabKind::kLetter;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  bool operator==(const LabelSequence&) const = default;
};

/// Output-unit inventory. Blank is always the last unit.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Builds from an explicit unit list; the reserved symbols are located by
  /// string. Validates the per-kind invariants.
  Vocabulary(VocabKind kind, std::vector<std::string> units, std::size_t num_words = 0)
      : kind_(kind), units_(std::move(units)), num_words_(num_words) {
    for (std::size_t i = 0; i < units_.size(); ++i) {
      if (!index_.emplace(units_[i], static_cast<UnitId>(i)).second) {
        throw Error("duplicate vocabulary unit: " + units_[i]);
      }
    }
    auto blank = Find(kBlankSymbol);
    if (!blank || *blank != static_cast<UnitId>(units_.size()) - 1) {
      throw Error("vocabulary must end with the blank unit");
    }
    if (kind_ != VocabKind::kWord) {
      space_id_ = Find(kSpaceSymbol);
      if (!space_id_) throw Error("letter/mix-unit vocabulary needs \"$\"");
    } else {
      oov_id_ = Find(kOovSymbol);
      if (!oov_id_) throw Error("word vocabulary needs an OOV unit");
    }
    if (kind_ == VocabKind::kMixUnit) {
      for (std::size_t i = 0; i < units_.size(); ++i) {
        const auto& u = units_[i];
        if (u == kBlankSymbol || u == kSpaceSymbol) continue;
        if (i >= num_words_ || u.size() <= 3) {
          pieces_.emplace(u, static_cast<UnitId>(i));
          max_piece_len_ = std::max(max_piece_len_, u.size());
        }
      }
      if (num_words_ > units_.size()) throw Error("mix-unit word count out of range");
    }
  }

  VocabKind kind() const { return kind_; }
  std::size_t size() const { return units_.size(); }
  const std::vector<std::string>& units() const { return units_; }
  const std::string& unit(UnitId id) const { return units_.at(static_cast<std::size_t>(id)); }
  UnitId blank_id() const { return static_cast<UnitId>(units_.size()) - 1; }
  std::optional<UnitId> space_id() const { return space_id_; }
  std::optional<UnitId> oov_id() const { return oov_id_; }
  /// Mix-unit vocabularies: the first num_words() units are whole words.
  std::size_t num_words() const { return num_words_; }

  std::optional<UnitId> Find(std::string_view unit) const {
    auto it = index_.find(std::string(unit));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Greedy longest-match segmentation table (mix-unit only).
  const std::unordered_map<std::string, UnitId>& pieces() const { return pieces_; }
  std::size_t max_piece_len() const { return max_piece_len_; }

  bool operator==(const Vocabulary& o) const {
    return kind_ == o.kind_ && units_ == o.units_ && num_words_ == o.num_words_;
  }

 private:
  VocabKind kind_ = VocabKind::kLetter;
  std::vector<std::string> units_;
  std::size_t num_words_ = 0;
  std::unordered_map<std::string, UnitId> index_;
  std::optional<UnitId> space_id_;
  std::optional<UnitId> oov_id_;
  std::unordered_map<std::string, UnitId> pieces_;
  std::size_t max_piece_len_ = 0;
};

namespace internal {

// Count-descending, then lexicographic.
inline std::vector<std::string> RankByCount(const std::map<std::string, int>& counts,
                                            int min_count) {
  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [w, c] : counts) {
    if (c >= min_count) kept.emplace_back(w, c);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(kept.size());
  for (auto& [w, c] : kept) out.push_back(std::move(w));
  return out;
}

inline bool IsNgramChar(char c) { return c >= 'a' && c <= 'z'; }

}  // namespace internal

/// The fixed 30-unit letter inventory: a-z, ', *, $, blank.
inline Vocabulary LetterVocabulary() {
  std::vector<std::string> units;
  for (char c : kLetterChars) units.emplace_back(1, c);
  units.emplace_back(kSpaceSymbol);
  units.emplace_back(kBlankSymbol);
  return Vocabulary(VocabKind::kLetter, std::move(units));
}

/// Builds a vocabulary of the requested kind from training transcripts.
/// Words occurring fewer than `min_count` times become OOV (word kind) or are
/// spelled with letter n-grams (mix-unit kind).
inline Vocabulary BuildVocab(const std::vector<WordSeq>& corpus, VocabKind kind,
                             int min_count) {
  if (min_count < 1) throw Error("BuildVocab: min_count must be >= 1");
  std::size_t tokens = 0;
  for (const auto& s : corpus) tokens += s.size();
  if (corpus.empty() || tokens == 0) throw Error("BuildVocab: empty corpus");
  if (kind == VocabKind::kLetter) return LetterVocabulary();

  std::map<std::string, int> counts;
  for (const auto& s : corpus)
    for (const auto& w : s) ++counts[w];
  std::vector<std::string> words = internal::RankByCount(counts, min_count);

  if (kind == VocabKind::kWord) {
    std::vector<std::string> units = words;
    units.emplace_back(kOovSymbol);
    units.emplace_back(kBlankSymbol);
    return Vocabulary(VocabKind::kWord, std::move(units));
  }

  // Mix-unit: frequent words, then 3-grams and 2-grams seen >= min_count
  // times inside OOV word tokens, then every single letter.
  std::map<std::string, int> ngram_counts[2];
  for (const auto& s : corpus) {
    for (const auto& w : s) {
      if (counts[w] >= min_count) continue;
      for (std::size_t n = 2; n <= 3; ++n) {
        for (std::size_t i = 0; i + n <= w.size(); ++i) {
          std::string g = w.substr(i, n);
          if (std::all_of(g.begin(), g.end(), internal::IsNgramChar)) ++ngram_counts[n - 2][g];
        }
      }
    }
  }
  std::vector<std::string> units = words;
  std::unordered_map<std::string, bool> seen;
  for (const auto& w : words) seen[w] = true;
  auto push = [&](const std::string& u) {
    if (!seen[u]) {
      seen[u] = true;
      units.push_back(u);
    }
  };
  for (int n = 3; n >= 2; --n) {
    for (const auto& g : internal::RankByCount(ngram_counts[n - 2], min_count)) push(g);
  }
  for (char c : kLetterChars) push(std::string(1, c));
  units.emplace_back(kSpaceSymbol);
  units.emplace_back(kBlankSymbol);
  return Vocabulary(VocabKind::kMixUnit, std::move(units), words.size());
}

/// Letters of each word with "$" between consecutive words.
inline LabelSequence EncodeLetters(const WordSeq& words, const Vocabulary& vocab) {
  if (vocab.kind() != VocabKind::kLetter) throw Error("EncodeLetters: not a letter vocabulary");
  LabelSequence out{{}, VocabKind::kLetter};
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (w > 0) out.ids.push_back(*vocab.space_id());
    for (char c : words[w]) {
      auto id = vocab.Find(std::string(1, c));
      if (!id || *id == *vocab.space_id() || *id == vocab.blank_id()) {
        throw Error(std::string("EncodeLetters: unknown character '") + c + "' in \"" +
                    words[w] + "\"");
      }
      out.ids.push_back(*id);
    }
  }
  return out;
}

inline LabelSequence EncodeWords(const WordSeq& words, const Vocabulary& vocab) {
  if (vocab.kind() != VocabKind::kWord) throw Error("EncodeWords: not a word vocabulary");
  LabelSequence out{{}, VocabKind::kWord};
  out.ids.reserve(words.size());
  for (const auto& w : words) {
    auto id = vocab.Find(w);
    bool usable = id && *id != vocab.blank_id() && *id != *vocab.oov_id();
    out.ids.push_back(usable ? *id : *vocab.oov_id());
  }
  return out;
}

/// A frequent word maps to its own unit; anything else is segmented greedily,
/// longest piece first, left to right.
inline std::vector<UnitId> DecomposeMixUnits(const std::string& word, const Vocabulary& vocab) {
  if (vocab.kind() != VocabKind::kMixUnit) throw Error("DecomposeMixUnits: not a mix-unit vocabulary");
  if (auto id = vocab.Find(word);
      id && static_cast<std::size_t>(*id) < vocab.num_words()) {
    return {*id};
  }
  std::vector<UnitId> out;
  std::size_t pos = 0;
  while (pos < word.size()) {
    std::size_t longest = std::min(vocab.max_piece_len(), word.size() - pos);
    bool matched = false;
    for (std::size_t n = longest; n >= 1; --n) {
      auto it = vocab.pieces().find(word.substr(pos, n));
      if (it != vocab.pieces().end()) {
        out.push_back(it->second);
        pos += n;
        matched = true;
        break;
      }
    }
    if (!matched) {
      throw Error(std::string("DecomposeMixUnits: unknown character '") + word[pos] + "' in \"" +
                  word + "\"");
    }
  }
  return out;
}

inline LabelSequence EncodeMix(const WordSeq& words, const Vocabulary& vocab) {
  LabelSequence out{{}, VocabKind::kMixUnit};
  for (std::size_t w = 0; w < words.size(); ++w) {
    auto pieces = DecomposeMixUnits(words[w], vocab);
    if (w > 0) out.ids.push_back(*vocab.space_id());
    out.ids.insert(out.ids.end(), pieces.begin(), pieces.end());
  }
  return out;
}

/// Dispatches on the vocabulary kind.
inline LabelSequence Encode(const WordSeq& words, const Vocabulary& vocab) {
  switch (vocab.kind()) {
    case VocabKind::kLetter: return EncodeLetters(words, vocab);
    case VocabKind::kWord: return EncodeWords(words, vocab);
    case VocabKind::kMixUnit: return EncodeMix(words, vocab);
  }
  throw Error("Encode: bad vocabulary kind");
}

/// Turns a (blank-free) unit sequence back into words.
inline WordSeq CollapseToWords(std::span<const UnitId> units, const Vocabulary& vocab) {
  WordSeq out;
  if (vocab.kind() == VocabKind::kWord) {
    for (UnitId id : units) out.push_back(vocab.unit(id));
    return out;
  }
  std::string current;
  for (UnitId id : units) {
    if (id == *vocab.space_id()) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current += vocab.unit(id);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

inline WordSeq CollapseToWords(const LabelSequence& labels, const Vocabulary& vocab) {
  return CollapseToWords(std::span<const UnitId>(labels.ids), vocab);
}

// Vocabulary text format: a magic header line, then one unit per line in
// index order. The reserved units are written as <blk>, $ and <unk>.
inline constexpr std::string_view kVocabMagic = "#ctcadapt-vocab";

inline void WriteVocab(std::ostream& os, const Vocabulary& vocab) {
  os << kVocabMagic << " 1 " << ToString(vocab.kind()) << ' ' << vocab.num_words() << '\n';
  for (const auto& u : vocab.units()) os << u << '\n';
}

inline Vocabulary ReadVocab(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw Error("vocabulary: missing header");
  std::istringstream hs(header);
  std::string magic, kind;
  int version = 0;
  std::size_t num_words = 0;
  hs >> magic >> version >> kind >> num_words;
  if (magic != kVocabMagic || version != 1) throw Error("vocabulary: bad header: " + header);
  std::vector<std::string> units;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw Error("vocabulary: empty unit line");
    units.push_back(line);
  }
  return Vocabulary(ParseVocabKind(kind), std::move(units), num_words);
}

inline void SaveVocab(const std::string& path, const Vocabulary& vocab) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  WriteVocab(os, vocab);
}

inline Vocabulary LoadVocab(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  return ReadVocab(is);
}

}  // namespace ctcadapt
