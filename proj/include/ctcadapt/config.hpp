// ctcadapt/config.hpp

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

// JSON run configuration. Every numeric setting of a run lives here so the
// resolved config written next to the outputs is a complete record of it.

#pragma once

#include "ctcadapt/adaptation.hpp"
#include "ctcadapt/corpus.hpp"
#include "ctcadapt/evalx.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <string>
#include <vector>

#ifndef CTCADAPT_VERSION
#define CTCADAPT_VERSION "unknown"
#endif

namespace ctcadapt {

using Json = nlohmann::ordered_json;

/// Thrown for malformed or inconsistent configuration files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct VocabConfig {
  /// Training-corpus count a word needs to get its own unit.
  int word_min_count = 20;
  int mix_min_count = 20;
};

struct ModelShapeConfig {
  std::vector<int> hidden = {32, 32};
  /// Frames stacked into one input vector.
  int stack = 1;
};

struct RunConfig {
  std::uint64_t seed = 1;
  CorpusGenConfig corpus;
  VocabConfig vocab;
  ModelShapeConfig model;
  OptimizerConfig si_training;
  OptimizerConfig letter_head_training;
  AdaptationConfig adaptation;
  std::vector<SweepSpec> sweeps;

  int input_dim() const { return corpus.feature_dim * model.stack; }
};

namespace config_internal {

inline void CheckKeys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
  }
}

template <typename T>
void Get(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename Parse, typename T>
void GetEnum(const Json& j, const char* key, T& out, const std::string& where, Parse parse) {
  if (!j.contains(key)) return;
  std::string s;
  Get(j, key, s, where);
  try {
    out = parse(s);
  } catch (const Error& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace config_internal

inline Json ToJson(const OptimizerConfig& o) {
  return Json{{"kind", ToString(o.kind)},        {"learning_rate", o.learning_rate},
              {"epochs", o.epochs},              {"clip", o.clip},
              {"batch_size", o.batch_size},      {"seed", o.seed},
              {"adam_beta1", o.adam_beta1},      {"adam_beta2", o.adam_beta2},
              {"adam_epsilon", o.adam_epsilon}};
}

inline OptimizerConfig OptimizerFromJson(const Json& j, const std::string& where, OptimizerConfig o = {}) {
  using namespace config_internal;
  CheckKeys(j, where,
            {"kind", "learning_rate", "epochs", "clip", "batch_size", "seed", "adam_beta1", "adam_beta2",
             "adam_epsilon"});
  GetEnum(j, "kind", o.kind, where, ParseOptimizerKind);
  Get(j, "learning_rate", o.learning_rate, where);
  Get(j, "epochs", o.epochs, where);
  Get(j, "clip", o.clip, where);
  Get(j, "batch_size", o.batch_size, where);
  Get(j, "seed", o.seed, where);
  Get(j, "adam_beta1", o.adam_beta1, where);
  Get(j, "adam_beta2", o.adam_beta2, where);
  Get(j, "adam_epsilon", o.adam_epsilon, where);
  if (o.epochs < 0 || !(o.learning_rate > 0.0) || o.batch_size < 0) {
    throw ConfigError(where + ": epochs and batch_size must be >= 0 and learning_rate > 0");
  }
  return o;
}

inline Json ToJson(const CorpusGenConfig& c) {
  return Json{{"words", c.words},
              {"vocab_size", c.vocab_size},
              {"zipf_exponent", c.zipf_exponent},
              {"feature_dim", c.feature_dim},
              {"min_frames_per_letter", c.min_frames_per_letter},
              {"max_frames_per_letter", c.max_frames_per_letter},
              {"boundary_frames", c.boundary_frames},
              {"noise", c.noise},
              {"accent", c.accent},
              {"min_words", c.min_words},
              {"max_words", c.max_words},
              {"train_speakers", c.train_speakers},
              {"test_speakers", c.test_speakers},
              {"train_utts_per_speaker", c.train_utts_per_speaker},
              {"adapt_utts_per_speaker", c.adapt_utts_per_speaker},
              {"test_utts_per_speaker", c.test_utts_per_speaker},
              {"scale_min", c.scale_min},
              {"scale_max", c.scale_max},
              {"offset_min", c.offset_min},
              {"offset_max", c.offset_max},
              {"identity_first_speaker", c.identity_first_speaker},
              {"seed", c.seed}};
}

inline CorpusGenConfig CorpusFromJson(const Json& j, std::uint64_t default_seed) {
  using namespace config_internal;
  const std::string w = "corpus";
  CheckKeys(j, w,
            {"words", "vocab_size", "zipf_exponent", "feature_dim", "min_frames_per_letter",
             "max_frames_per_letter", "boundary_frames", "noise", "accent", "min_words", "max_words",
             "train_speakers", "test_speakers", "train_utts_per_speaker", "adapt_utts_per_speaker",
             "test_utts_per_speaker", "scale_min", "scale_max", "offset_min", "offset_max",
             "identity_first_speaker", "seed"});
  CorpusGenConfig c;
  c.seed = default_seed;
  Get(j, "words", c.words, w);
  Get(j, "vocab_size", c.vocab_size, w);
  Get(j, "zipf_exponent", c.zipf_exponent, w);
  Get(j, "feature_dim", c.feature_dim, w);
  Get(j, "min_frames_per_letter", c.min_frames_per_letter, w);
  Get(j, "max_frames_per_letter", c.max_frames_per_letter, w);
  Get(j, "boundary_frames", c.boundary_frames, w);
  Get(j, "noise", c.noise, w);
  Get(j, "accent", c.accent, w);
  Get(j, "min_words", c.min_words, w);
  Get(j, "max_words", c.max_words, w);
  Get(j, "train_speakers", c.train_speakers, w);
  Get(j, "test_speakers", c.test_speakers, w);
  Get(j, "train_utts_per_speaker", c.train_utts_per_speaker, w);
  Get(j, "adapt_utts_per_speaker", c.adapt_utts_per_speaker, w);
  Get(j, "test_utts_per_speaker", c.test_utts_per_speaker, w);
  Get(j, "scale_min", c.scale_min, w);
  Get(j, "scale_max", c.scale_max, w);
  Get(j, "offset_min", c.offset_min, w);
  Get(j, "offset_max", c.offset_max, w);
  Get(j, "identity_first_speaker", c.identity_first_speaker, w);
  Get(j, "seed", c.seed, w);
  return c;
}

inline Json ToJson(const AdaptationConfig& a) {
  return Json{{"method", ToString(a.method)},
              {"alpha", a.alpha},
              {"beta", a.beta},
              {"scope", ToString(a.scope)},
              {"adapter", ToString(a.adapter)},
              {"supervision", ToString(a.supervision)},
              {"utterance_budget", a.utterance_budget},
              {"cache_si_posteriors", a.cache_si_posteriors},
              {"optimizer", ToJson(a.optimizer)}};
}

inline AdaptationConfig AdaptationFromJson(const Json& j, std::uint64_t default_seed) {
  using namespace config_internal;
  const std::string w = "adaptation";
  CheckKeys(j, w,
            {"method", "alpha", "beta", "scope", "adapter", "supervision", "utterance_budget",
             "cache_si_posteriors", "optimizer"});
  AdaptationConfig a;
  a.optimizer.seed = default_seed;
  GetEnum(j, "method", a.method, w, ParseAdaptMethod);
  Get(j, "alpha", a.alpha, w);
  Get(j, "beta", a.beta, w);
  GetEnum(j, "scope", a.scope, w, ParseUpdateScope);
  GetEnum(j, "adapter", a.adapter, w, ParseAdapterKind);
  GetEnum(j, "supervision", a.supervision, w, ParseSupervision);
  Get(j, "utterance_budget", a.utterance_budget, w);
  Get(j, "cache_si_posteriors", a.cache_si_posteriors, w);
  if (j.contains("optimizer")) a.optimizer = OptimizerFromJson(j["optimizer"], w + ".optimizer", a.optimizer);
  if (!(a.alpha >= 0.0 && a.alpha <= 1.0) || !(a.beta >= 0.0 && a.beta <= 1.0)) {
    throw ConfigError(w + ": alpha and beta must lie in [0, 1]");
  }
  if (a.utterance_budget < 1) throw ConfigError(w + ": utterance_budget must be >= 1");
  return a;
}

inline Json ToJson(const SweepSpec& s) {
  Json scopes = Json::array();
  for (auto sc : s.scopes) scopes.push_back(ToString(sc));
  return Json{{"method", ToString(s.method)},
              {"supervision", ToString(s.supervision)},
              {"adapter", ToString(s.adapter)},
              {"scopes", scopes},
              {"budgets", s.budgets},
              {"weights", s.weights},
              {"cache_si_posteriors", s.cache_si_posteriors},
              {"optimizer", ToJson(s.optimizer)}};
}

inline SweepSpec SweepFromJson(const Json& j, const std::string& where, const OptimizerConfig& default_opt) {
  using namespace config_internal;
  CheckKeys(j, where,
            {"method", "supervision", "adapter", "scopes", "budgets", "weights", "cache_si_posteriors",
             "optimizer"});
  SweepSpec s;
  s.optimizer = default_opt;
  GetEnum(j, "method", s.method, where, ParseAdaptMethod);
  GetEnum(j, "supervision", s.supervision, where, ParseSupervision);
  GetEnum(j, "adapter", s.adapter, where, ParseAdapterKind);
  if (j.contains("scopes")) {
    std::vector<std::string> names;
    Get(j, "scopes", names, where);
    s.scopes.clear();
    for (const auto& n : names) {
      try {
        s.scopes.push_back(ParseUpdateScope(n));
      } catch (const Error& e) {
        throw ConfigError(where + ".scopes: " + e.what());
      }
    }
  }
  Get(j, "budgets", s.budgets, where);
  Get(j, "weights", s.weights, where);
  Get(j, "cache_si_posteriors", s.cache_si_posteriors, where);
  if (j.contains("optimizer")) s.optimizer = OptimizerFromJson(j["optimizer"], where + ".optimizer", s.optimizer);
  if (s.scopes.empty() || s.budgets.empty() || s.weights.empty()) {
    throw ConfigError(where + ": scopes, budgets and weights must be non-empty");
  }
  for (int b : s.budgets) {
    if (b < 1) throw ConfigError(where + ": budgets must be >= 1");
  }
  for (double w : s.weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError(where + ": weights must lie in [0, 1]");
  }
  return s;
}

inline Json ToJson(const RunConfig& c) {
  Json sweeps = Json::array();
  for (const auto& s : c.sweeps) sweeps.push_back(ToJson(s));
  return Json{{"seed", c.seed},
              {"corpus", ToJson(c.corpus)},
              {"vocab", Json{{"word_min_count", c.vocab.word_min_count}, {"mix_min_count", c.vocab.mix_min_count}}},
              {"model", Json{{"hidden", c.model.hidden}, {"stack", c.model.stack}}},
              {"si_training", ToJson(c.si_training)},
              {"letter_head_training", ToJson(c.letter_head_training)},
              {"adaptation", ToJson(c.adaptation)},
              {"sweeps", sweeps}};
}

/// Parses a run configuration; absent keys keep their defaults and sub-seeds
/// default to the top-level seed.
inline RunConfig RunConfigFromJson(const Json& j) {
  using namespace config_internal;
  CheckKeys(j, "config",
            {"seed", "corpus", "vocab", "model", "si_training", "letter_head_training", "adaptation", "sweeps"});
  RunConfig c;
  Get(j, "seed", c.seed, "config");
  c.corpus.seed = c.seed;
  c.si_training.seed = c.seed;
  c.letter_head_training.seed = c.seed;
  c.adaptation.optimizer.seed = c.seed;
  if (j.contains("corpus")) c.corpus = CorpusFromJson(j["corpus"], c.seed);
  if (j.contains("vocab")) {
    CheckKeys(j["vocab"], "vocab", {"word_min_count", "mix_min_count"});
    Get(j["vocab"], "word_min_count", c.vocab.word_min_count, "vocab");
    Get(j["vocab"], "mix_min_count", c.vocab.mix_min_count, "vocab");
  }
  if (j.contains("model")) {
    CheckKeys(j["model"], "model", {"hidden", "stack"});
    Get(j["model"], "hidden", c.model.hidden, "model");
    Get(j["model"], "stack", c.model.stack, "model");
  }
  if (c.model.hidden.empty()) throw ConfigError("model.hidden must list at least one layer");
  for (int h : c.model.hidden) {
    if (h < 1) throw ConfigError("model.hidden entries must be positive");
  }
  if (c.model.stack < 1) throw ConfigError("model.stack must be >= 1");
  if (j.contains("si_training")) c.si_training = OptimizerFromJson(j["si_training"], "si_training", c.si_training);
  if (j.contains("letter_head_training")) {
    c.letter_head_training =
        OptimizerFromJson(j["letter_head_training"], "letter_head_training", c.letter_head_training);
  }
  if (j.contains("adaptation")) c.adaptation = AdaptationFromJson(j["adaptation"], c.seed);
  if (j.contains("sweeps")) {
    if (!j["sweeps"].is_array()) throw ConfigError("sweeps: expected an array");
    for (std::size_t i = 0; i < j["sweeps"].size(); ++i) {
      c.sweeps.push_back(SweepFromJson(j["sweeps"][i], "sweeps[" + std::to_string(i) + "]", c.adaptation.optimizer));
    }
  }
  return c;
}

inline RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  Json j;
  try {
    j = Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return RunConfigFromJson(j);
}

/// Record written next to every command's outputs.
inline Json ReproducibilityRecord(const std::string& command, const RunConfig& config,
                                  const Json& arguments = Json::object()) {
  return Json{{"tool", "ctcadapt"},
              {"version", CTCADAPT_VERSION},
              {"command", command},
              {"seed", config.seed},
              {"arguments", arguments},
              {"config", ToJson(config)}};
}

inline Json ToJson(const AdaptationReport& r) {
  return Json{{"speaker", r.speaker},
              {"method", ToString(r.method)},
              {"supervision", ToString(r.supervision)},
              {"epoch_loss", r.epoch_loss},
              {"trainable_groups", r.trainable_groups},
              {"groups_updated", r.groups_updated},
              {"utterances_available", r.utterances_available},
              {"utterances_used", r.utterances_used},
              {"dropped", r.dropped},
              {"notes", r.notes},
              {"checksum", r.checksum}};
}

}  // namespace ctcadapt
