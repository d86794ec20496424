// ctcadapt/corpus.hpp

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

#include "ctcadapt/binary_io.hpp"
#include "ctcadapt/numerics.hpp"
#include "ctcadapt/random.hpp"
#include "ctcadapt/targets.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ctcadapt {

enum class Split { kTrain, kAdapt, kTest };

inline std::string_view ToString(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kAdapt: return "adapt";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split ParseSplit(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "adapt") return Split::kAdapt;
  if (s == "test") return Split::kTest;
  throw Error("unknown split: " + std::string(s));
}

struct Utterance {
  std::string id;
  std::string speaker;
  Split split = Split::kTrain;
  Matrix features;  // T x d, one row per frame
  WordSeq transcript;
};

/// Per-dimension affine distortion x -> scale * x + offset.
struct SpeakerTransform {
  Vector scale;
  Vector offset;

  Matrix Apply(const Matrix& frames) const {
    return (frames.array().rowwise() * scale.transpose().array()).rowwise() +
           offset.transpose().array();
  }
};

struct ManifestRecord {
  std::string id;
  std::string speaker;
  Split split = Split::kTrain;
  std::string feature_path;  // relative to the manifest's directory
  WordSeq transcript;

  bool operator==(const ManifestRecord&) const = default;
};

struct CorpusManifest {
  std::vector<ManifestRecord> records;

  /// Ids present in both the adapt and test split of one speaker.
  std::vector<std::string> SplitOverlap() const {
    std::map<std::string, std::set<std::string>> adapt;
    for (const auto& r : records)
      if (r.split == Split::kAdapt) adapt[r.speaker].insert(r.id);
    std::vector<std::string> overlap;
    for (const auto& r : records) {
      if (r.split == Split::kTest && adapt[r.speaker].count(r.id)) overlap.push_back(r.id);
    }
    return overlap;
  }
};

/// Frames-per-unit sizes, speaker counts and the word distribution of a
/// synthetic corpus. Words are drawn with Zipf weights 1 / rank^s.
struct CorpusGenConfig {
  std::vector<std::string> words;  // empty: built-in list, first vocab_size
  int vocab_size = 40;
  double zipf_exponent = 1.0;
  int feature_dim = 16;
  int min_frames_per_letter = 2;
  int max_frames_per_letter = 3;
  int boundary_frames = 1;
  double noise = 0.3;
  /// Std of a per-speaker random shift of each letter mean, applied before
  /// the affine transform.
  double accent = 0.0;
  int min_words = 2;
  int max_words = 5;
  int train_speakers = 20;
  int test_speakers = 5;
  int train_utts_per_speaker = 50;
  int adapt_utts_per_speaker = 200;
  int test_utts_per_speaker = 20;
  double scale_min = 0.7, scale_max = 1.3;
  double offset_min = -0.5, offset_max = 0.5;
  /// Gives the first training speaker the identity transform.
  bool identity_first_speaker = false;
  std::uint64_t seed = 1;
};

inline const std::vector<std::string>& BuiltinWordList() {
  static const std::vector<std::string> words = {
      "the",    "to",     "you",    "and",   "i",      "a",      "it",     "is",
      "we",     "me",     "call",   "text",  "send",   "meet",   "at",     "on",
      "home",   "now",    "later",  "can",   "see",    "ok",     "yes",    "no",
      "time",   "today",  "tonight", "work", "love",   "what",   "when",   "where",
      "dinner", "phone",  "thanks", "please", "coming", "back",  "soon",   "running",
      "late",   "morning", "night", "going", "tomorrow", "lunch", "sure",  "good",
      "happy",  "birthday", "weekend", "office", "meeting", "message", "reply", "friday",
      "monday", "cortana", "remind", "pick",  "store",  "milk",   "bread",  "driving",
      "airport", "flight", "landed", "parking", "traffic", "minutes", "hours", "movie",
      "game",   "score",  "weather", "rain",  "sunny",  "coffee", "doctor", "school",
      "kids",   "mom",    "dad",    "sister", "brother", "party", "gift",   "ticket",
      "hotel",  "beach",  "music",  "song",   "photo",  "video",  "email",  "address",
      "number", "quick",  "question", "answer", "maybe", "never", "always", "really",
      "zebra",  "quartz", "jazz",   "fjord", "kayak",  "wombat", "yacht",  "vortex",
  };
  return words;
}

/// Everything the generator produced, in memory. `clean` holds the
/// features before the speaker transform, parallel to `utterances`.
struct GeneratedCorpus {
  CorpusManifest manifest;
  std::vector<Utterance> utterances;
  std::vector<Matrix> clean;
  std::map<std::string, SpeakerTransform> transforms;
  std::vector<std::string> words;
  std::vector<double> weights;
};

inline SpeakerTransform DrawSpeakerTransform(const CorpusGenConfig& cfg, const std::string& speaker) {
  Rng rng(DeriveSeed(cfg.seed, "transform/" + speaker));
  SpeakerTransform tr{Vector(cfg.feature_dim), Vector(cfg.feature_dim)};
  for (int i = 0; i < cfg.feature_dim; ++i) {
    tr.scale[i] = rng.Uniform(cfg.scale_min, cfg.scale_max);
    tr.offset[i] = rng.Uniform(cfg.offset_min, cfg.offset_max);
  }
  return tr;
}

inline GeneratedCorpus GenerateSyntheticCorpus(const CorpusGenConfig& cfg) {
  if (cfg.feature_dim <= 0 || cfg.min_frames_per_letter < 1 ||
      cfg.max_frames_per_letter < cfg.min_frames_per_letter || cfg.min_words < 1 ||
      cfg.max_words < cfg.min_words || cfg.train_speakers < 0 || cfg.test_speakers < 0 ||
      cfg.boundary_frames < 0 || cfg.noise < 0.0 || cfg.scale_min <= 0.0) {
    throw Error("corpus: invalid generator configuration");
  }
  GeneratedCorpus out;
  out.words = cfg.words;
  if (out.words.empty()) {
    const auto& builtin = BuiltinWordList();
    if (cfg.vocab_size < 1) throw Error("corpus: empty word list");
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.vocab_size), builtin.size());
    out.words.assign(builtin.begin(), builtin.begin() + static_cast<long>(n));
  }
  if (out.words.empty()) throw Error("corpus: empty word list");
  for (std::size_t r = 0; r < out.words.size(); ++r) {
    out.weights.push_back(1.0 / std::pow(static_cast<double>(r + 1), cfg.zipf_exponent));
  }

  // Emission means: one per letter plus one for word boundaries.
  const int d = cfg.feature_dim;
  Rng mean_rng(DeriveSeed(cfg.seed, "emissions"));
  std::map<char, Vector> means;
  for (char c : kLetterChars) {
    Vector m(d);
    for (int i = 0; i < d; ++i) m[i] = mean_rng.Normal();
    means[c] = m;
  }
  Vector boundary(d);
  for (int i = 0; i < d; ++i) boundary[i] = mean_rng.Normal();

  auto emit_speaker = [&](const std::string& speaker, bool identity,
                          std::initializer_list<std::pair<Split, int>> splits) {
    SpeakerTransform tr = DrawSpeakerTransform(cfg, speaker);
    if (identity) {
      tr.scale.setOnes();
      tr.offset.setZero();
    }
    out.transforms[speaker] = tr;
    std::map<char, Vector> spk_means = means;
    if (cfg.accent > 0.0) {
      Rng acc(DeriveSeed(cfg.seed, "accent/" + speaker));
      for (auto& [c, m] : spk_means)
        for (int i = 0; i < d; ++i) m[i] += cfg.accent * acc.Normal();
    }
    Rng rng(DeriveSeed(cfg.seed, "utterances/" + speaker));
    for (auto [split, count] : splits) {
      for (int n = 0; n < count; ++n) {
        Utterance u;
        u.speaker = speaker;
        u.split = split;
        char idbuf[64];
        std::snprintf(idbuf, sizeof idbuf, "%s-%s-%04d", speaker.c_str(),
                      std::string(ToString(split)).c_str(), n);
        u.id = idbuf;
        const int nwords = cfg.min_words +
                           static_cast<int>(rng.Index(static_cast<std::uint64_t>(cfg.max_words - cfg.min_words + 1)));
        for (int w = 0; w < nwords; ++w) u.transcript.push_back(out.words[rng.Categorical(out.weights)]);
        std::vector<const Vector*> frames;
        auto push_boundary = [&] {
          for (int k = 0; k < cfg.boundary_frames; ++k) frames.push_back(&boundary);
        };
        push_boundary();
        for (const auto& word : u.transcript) {
          for (char c : word) {
            auto it = spk_means.find(c);
            if (it == spk_means.end()) throw Error(std::string("corpus: unsupported character '") + c + "'");
            const int len = cfg.min_frames_per_letter +
                            static_cast<int>(rng.Index(static_cast<std::uint64_t>(
                                cfg.max_frames_per_letter - cfg.min_frames_per_letter + 1)));
            for (int k = 0; k < len; ++k) frames.push_back(&it->second);
          }
          push_boundary();
        }
        Matrix clean(static_cast<Eigen::Index>(frames.size()), d);
        for (std::size_t t = 0; t < frames.size(); ++t) {
          for (int i = 0; i < d; ++i) {
            clean(static_cast<Eigen::Index>(t), i) = (*frames[t])[i] + cfg.noise * rng.Normal();
          }
        }
        u.features = tr.Apply(clean);
        out.manifest.records.push_back(
            {u.id, u.speaker, u.split, "feats/" + u.id + ".feat", u.transcript});
        out.clean.push_back(std::move(clean));
        out.utterances.push_back(std::move(u));
      }
    }
  };

  char name[32];
  for (int s = 0; s < cfg.train_speakers; ++s) {
    std::snprintf(name, sizeof name, "trn%03d", s);
    emit_speaker(name, cfg.identity_first_speaker && s == 0, {{Split::kTrain, cfg.train_utts_per_speaker}});
  }
  for (int s = 0; s < cfg.test_speakers; ++s) {
    std::snprintf(name, sizeof name, "tst%03d", s);
    emit_speaker(name, false,
                 {{Split::kAdapt, cfg.adapt_utts_per_speaker}, {Split::kTest, cfg.test_utts_per_speaker}});
  }
  return out;
}

/// Concatenates groups of `stack` consecutive frames; a short final group is
/// padded by repeating the last frame.
inline Matrix StackFrames(const Matrix& features, int stack) {
  if (stack < 1) throw Error("StackFrames: stack must be >= 1");
  if (stack == 1) return features;
  const Eigen::Index T = features.rows(), d = features.cols();
  const Eigen::Index out_t = (T + stack - 1) / stack;
  Matrix out(out_t, d * stack);
  for (Eigen::Index o = 0; o < out_t; ++o) {
    for (int k = 0; k < stack; ++k) {
      const Eigen::Index src = std::min(o * stack + k, T - 1);
      out.block(o, k * d, 1, d) = features.row(src);
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Feature files: "CTCAFEAT" magic, i32 T, i32 d, T*d little-endian f64 in
// row-major order. Manifest: "#ctcadapt-manifest 1" header line, then
// id<TAB>speaker<TAB>split<TAB>path<TAB>space-joined transcript.

inline constexpr char kFeatureMagic[8] = {'C', 'T', 'C', 'A', 'F', 'E', 'A', 'T'};
inline constexpr std::string_view kManifestHeader = "#ctcadapt-manifest 1";

inline void SaveFeatures(const std::string& path, const Matrix& features) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os.write(kFeatureMagic, 8);
  io::PutU32(os, static_cast<std::uint32_t>(features.rows()));
  io::PutU32(os, static_cast<std::uint32_t>(features.cols()));
  for (Eigen::Index t = 0; t < features.rows(); ++t)
    for (Eigen::Index i = 0; i < features.cols(); ++i) io::PutF64(os, features(t, i));
  if (!os) throw Error("write failed: " + path);
}

inline Matrix LoadFeatures(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read feature file " + path);
  char magic[8];
  is.read(magic, 8);
  if (is.gcount() != 8 || std::memcmp(magic, kFeatureMagic, 8) != 0) {
    throw Error("feature file " + path + ": bad magic");
  }
  std::int32_t T, d;
  try {
    T = static_cast<std::int32_t>(io::GetU32(is));
    d = static_cast<std::int32_t>(io::GetU32(is));
  } catch (const Error&) {
    throw Error("feature file " + path + ": truncated header");
  }
  if (T < 1 || d < 1) throw Error("feature file " + path + ": bad dimensions");
  is.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::uint64_t>(is.tellg());
  const std::uint64_t expect = 16 + 8ULL * static_cast<std::uint64_t>(T) * static_cast<std::uint64_t>(d);
  if (bytes != expect) {
    throw Error("feature file " + path + ": dimension mismatch (" + std::to_string(T) + "x" +
                std::to_string(d) + " needs " + std::to_string(expect) + " bytes, found " +
                std::to_string(bytes) + ")");
  }
  is.seekg(16);
  Matrix m(T, d);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < d; ++i) m(t, i) = io::GetF64(is);
  return m;
}

inline std::string JoinWords(const WordSeq& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) s += ' ';
    s += words[i];
  }
  return s;
}

inline WordSeq SplitWords(const std::string& text) {
  std::istringstream is(text);
  WordSeq out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

inline void WriteManifest(std::ostream& os, const CorpusManifest& m) {
  os << kManifestHeader << '\n';
  for (const auto& r : m.records) {
    os << r.id << '\t' << r.speaker << '\t' << ToString(r.split) << '\t' << r.feature_path << '\t'
       << JoinWords(r.transcript) << '\n';
  }
}

inline CorpusManifest ReadManifest(std::istream& is) {
  CorpusManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line == kManifestHeader) continue;
      if (line.empty()) continue;
      throw Error("manifest: bad header (expected \"" + std::string(kManifestHeader) + "\")");
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find('\t', start)) != std::string::npos; start = pos + 1) {
      fields.push_back(line.substr(start, pos - start));
    }
    fields.push_back(line.substr(start));
    if (fields.size() != 5 || fields[0].empty() || fields[3].empty()) {
      throw Error("manifest line " + std::to_string(lineno) + ": malformed record");
    }
    m.records.push_back({fields[0], fields[1], ParseSplit(fields[2]), fields[3], SplitWords(fields[4])});
  }
  return m;
}

inline void SaveManifest(const std::string& path, const CorpusManifest& m) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  WriteManifest(os, m);
}

inline CorpusManifest LoadManifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read manifest " + path);
  return ReadManifest(is);
}

/// Writes manifest.tsv and feats/*.feat under `dir`.
inline void WriteCorpus(const std::string& dir, const GeneratedCorpus& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "feats");
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    SaveFeatures((fs::path(dir) / corpus.manifest.records[i].feature_path).string(),
                 corpus.utterances[i].features);
  }
  SaveManifest((fs::path(dir) / "manifest.tsv").string(), corpus.manifest);
}

/// Loads every utterance listed in `dir`/manifest.tsv. When
/// `expected_dim` > 0 each feature file must have that many columns.
inline std::vector<Utterance> LoadCorpus(const std::string& dir, int expected_dim = 0) {
  namespace fs = std::filesystem;
  CorpusManifest m = LoadManifest((fs::path(dir) / "manifest.tsv").string());
  std::vector<Utterance> out;
  out.reserve(m.records.size());
  for (const auto& r : m.records) {
    Utterance u{r.id, r.speaker, r.split, LoadFeatures((fs::path(dir) / r.feature_path).string()),
                r.transcript};
    if (expected_dim > 0 && u.features.cols() != expected_dim) {
      throw Error("utterance " + r.id + ": feature dim " + std::to_string(u.features.cols()) +
                  " does not match expected " + std::to_string(expected_dim));
    }
    out.push_back(std::move(u));
  }
  return out;
}

inline std::vector<Utterance> SelectSplit(const std::vector<Utterance>& utts, Split split) {
  std::vector<Utterance> out;
  for (const auto& u : utts)
    if (u.split == split) out.push_back(u);
  return out;
}

/// Adaptation and test utterances of one evaluation speaker.
struct SpeakerData {
  std::string speaker;
  std::vector<Utterance> adapt;
  std::vector<Utterance> test;
};

/// Groups adapt/test utterances by speaker, in first-appearance order.
inline std::vector<SpeakerData> GroupSpeakers(const std::vector<Utterance>& utts) {
  std::vector<SpeakerData> out;
  std::map<std::string, std::size_t> index;
  for (const auto& u : utts) {
    if (u.split == Split::kTrain) continue;
    auto [it, inserted] = index.emplace(u.speaker, out.size());
    if (inserted) out.push_back({u.speaker, {}, {}});
    auto& sd = out[it->second];
    (u.split == Split::kAdapt ? sd.adapt : sd.test).push_back(u);
  }
  return out;
}

inline std::vector<Utterance> StackCorpus(std::vector<Utterance> utts, int stack) {
  if (stack == 1) return utts;
  for (auto& u : utts) u.features = StackFrames(u.features, stack);
  return utts;
}

}  // namespace ctcadapt
