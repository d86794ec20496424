// ctcadapt/pipeline.hpp

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

// Glue shared by the command-line tool and the experiment drivers: building
// head vocabularies from a training split and training the SI models.

#pragma once

#include "ctcadapt/adaptation.hpp"
#include "ctcadapt/config.hpp"
#include "ctcadapt/corpus.hpp"

#include <string>
#include <vector>

namespace ctcadapt {

inline VocabKind ParseHeadKind(std::string_view s) {
  if (s == "letter") return VocabKind::kLetter;
  if (s == "word") return VocabKind::kWord;
  if (s == "mixunit") return VocabKind::kMixUnit;
  throw Error("unknown head kind: " + std::string(s) + " (expected letter, word or mixunit)");
}

inline std::string HeadName(VocabKind kind) {
  switch (kind) {
    case VocabKind::kLetter: return "letter";
    case VocabKind::kWord: return "word";
    case VocabKind::kMixUnit: return "mixunit";
  }
  return "?";
}

inline Vocabulary BuildHeadVocab(VocabKind kind, const std::vector<Utterance>& train, const VocabConfig& cfg) {
  if (kind == VocabKind::kLetter) return LetterVocabulary();
  std::vector<WordSeq> text;
  text.reserve(train.size());
  for (const auto& u : train) text.push_back(u.transcript);
  return BuildVocab(text, kind, kind == VocabKind::kWord ? cfg.word_min_count : cfg.mix_min_count);
}

inline ModelConfig ModelConfigFor(const RunConfig& run, HeadSpec head) {
  ModelConfig mc;
  mc.feature_dim = run.input_dim();
  mc.hidden = run.model.hidden;
  mc.heads = {std::move(head)};
  return mc;
}

/// Trains an SI model with one head of the given kind on the training split.
inline CtcModel TrainSiModel(const RunConfig& run, const std::vector<Utterance>& train, VocabKind kind,
                             TrainLog* log = nullptr) {
  Vocabulary vocab = BuildHeadVocab(kind, train, run.vocab);
  const std::uint64_t init_seed = DeriveSeed(run.seed, "init/" + HeadName(kind));
  return TrainSi(ModelConfigFor(run, HeadSpec{HeadName(kind), std::move(vocab)}), init_seed, train,
                 run.si_training, log);
}

/// Adds a letter head to a word or mix-unit model and fits it with the
/// encoder frozen.
inline CtcModel AddLetterHead(CtcModel model, const std::vector<Utterance>& train, const RunConfig& run,
                              TrainLog* log = nullptr) {
  if (model.primary_head().vocab.kind() == VocabKind::kLetter) {
    throw Error("the letter model needs no auxiliary letter head");
  }
  model.AttachLetterHead(LetterVocabulary());
  return TrainLetterHead(std::move(model), train, run.letter_head_training, log);
}

/// Training split loaded with the model's frame stacking applied.
inline std::vector<Utterance> PrepareUtterances(std::vector<Utterance> utts, const RunConfig& run) {
  return StackCorpus(std::move(utts), run.model.stack);
}

}  // namespace ctcadapt
