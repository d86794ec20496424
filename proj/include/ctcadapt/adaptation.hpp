// ctcadapt/adaptation.hpp

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

#include "ctcadapt/corpus.hpp"
#include "ctcadapt/ctc.hpp"
#include "ctcadapt/model.hpp"
#include "ctcadapt/numerics.hpp"
#include "ctcadapt/random.hpp"
#include "ctcadapt/targets.hpp"

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctcadapt {

enum class AdaptMethod { kKld, kMtl };
enum class AdapterKind { kNone, kScalar, kLinear };
enum class Supervision { kSupervised, kUnsupervised };
enum class OptimizerKind { kSgd, kAdam };

inline std::string_view ToString(AdaptMethod m) { return m == AdaptMethod::kKld ? "KLD" : "MTL"; }
inline std::string_view ToString(Supervision s) {
  return s == Supervision::kSupervised ? "supervised" : "unsupervised";
}
inline std::string_view ToString(AdapterKind a) {
  switch (a) {
    case AdapterKind::kNone: return "none";
    case AdapterKind::kScalar: return "scalar";
    case AdapterKind::kLinear: return "linear";
  }
  return "?";
}
inline std::string_view ToString(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

inline AdaptMethod ParseAdaptMethod(std::string_view s) {
  if (s == "KLD" || s == "kld") return AdaptMethod::kKld;
  if (s == "MTL" || s == "mtl") return AdaptMethod::kMtl;
  throw Error("unknown adaptation method: " + std::string(s));
}
inline Supervision ParseSupervision(std::string_view s) {
  if (s == "supervised") return Supervision::kSupervised;
  if (s == "unsupervised") return Supervision::kUnsupervised;
  throw Error("unknown supervision mode: " + std::string(s));
}
inline AdapterKind ParseAdapterKind(std::string_view s) {
  if (s == "none") return AdapterKind::kNone;
  if (s == "scalar") return AdapterKind::kScalar;
  if (s == "linear") return AdapterKind::kLinear;
  throw Error("unknown adapter kind: " + std::string(s));
}
inline OptimizerKind ParseOptimizerKind(std::string_view s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw Error("unknown optimizer: " + std::string(s));
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 0.05;
  int epochs = 20;
  /// Global-norm clipping threshold; <= 0 disables clipping.
  double clip = 5.0;
  /// Utterances per update; 0 means full batch.
  int batch_size = 0;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct AdaptationConfig {
  AdaptMethod method = AdaptMethod::kKld;
  double alpha = 0.0;
  double beta = 0.0;
  UpdateScope scope = UpdateScope::kHidden;
  AdapterKind adapter = AdapterKind::kNone;
  Supervision supervision = Supervision::kSupervised;
  int utterance_budget = 50;
  /// Keep the frozen SI posteriors per utterance instead of recomputing them
  /// every epoch. Results are identical either way.
  bool cache_si_posteriors = false;
  OptimizerConfig optimizer;
};

struct LossGrad {
  bool feasible = true;
  double loss = 0.0;
  Vector grad;
};

// ---------------------------------------------------------------- objectives

/// Sum over frames and units of P_si * ln(P_si / P_sd).
inline double KldTerm(const PosteriorLattice& si, const PosteriorLattice& sd) {
  if (si.probs.rows() != sd.probs.rows() || si.probs.cols() != sd.probs.cols()) {
    throw Error("KldTerm: lattice shapes differ");
  }
  double total = 0.0;
  for (Eigen::Index t = 0; t < si.probs.rows(); ++t) {
    for (Eigen::Index u = 0; u < si.probs.cols(); ++u) {
      const double p = si.probs(t, u);
      if (p > 0.0) total += p * (std::log(p) - SafeLog(sd.probs(t, u)));
    }
  }
  return std::max(0.0, total);
}

/// One weighted loss on one head's output. A zero weight drops the term
/// entirely, so its target need not even be feasible.
struct HeadTerm {
  std::string head;
  std::span<const UnitId> labels;
  double ctc_weight = 1.0;
  /// T x U SI posteriors for the cross-entropy regularizer.
  const Matrix* si_probs = nullptr;
  double kld_weight = 0.0;
};

/// Evaluates the weighted sum of CTC and cross-entropy terms over the heads
/// of `model`, sharing one encoder pass. When `grad` is non-null it receives
/// the full parameter gradient (encoder part only if `encoder_grad`).
inline LossGrad EvaluateTerms(const CtcModel& model, const Matrix& features,
                              std::span<const HeadTerm> terms, bool want_grad,
                              bool encoder_grad = true) {
  LossGrad out;
  EncoderTrace trace;
  const bool trace_needed = want_grad && encoder_grad;
  Matrix enc = model.Encode(features, trace_needed ? &trace : nullptr);
  if (want_grad) out.grad = Vector::Zero(static_cast<Eigen::Index>(model.params().size()));
  Matrix d_enc;
  for (const auto& term : terms) {
    if (term.ctc_weight == 0.0 && term.kld_weight == 0.0) continue;
    Matrix logits = model.HeadLogits(term.head, enc);
    PosteriorLattice lattice = CtcModel::LatticeFromLogits(logits, term.head);
    Matrix d_logits;  // T x U
    if (term.ctc_weight != 0.0) {
      CtcLossResult ctc = CtcLoss(lattice, term.labels);
      if (!ctc.feasible) {
        out.feasible = false;
        out.loss = std::numeric_limits<double>::infinity();
        out.grad = Vector();
        return out;
      }
      out.loss += term.ctc_weight * ctc.loss;
      if (want_grad) d_logits = term.ctc_weight * ctc.grad_logits;
    }
    if (term.kld_weight != 0.0) {
      if (!term.si_probs || term.si_probs->rows() != lattice.probs.rows() ||
          term.si_probs->cols() != lattice.probs.cols()) {
        throw Error("EvaluateTerms: SI posteriors missing or mis-shaped");
      }
      const Matrix& p_si = *term.si_probs;
      double ce = 0.0;
      for (Eigen::Index t = 0; t < p_si.rows(); ++t)
        for (Eigen::Index u = 0; u < p_si.cols(); ++u) ce -= p_si(t, u) * SafeLog(lattice.probs(t, u));
      out.loss += term.kld_weight * ce;
      if (want_grad) {
        Matrix d = term.kld_weight * (lattice.probs - p_si);
        if (d_logits.size() == 0) {
          d_logits = std::move(d);
        } else {
          d_logits += d;
        }
      }
    }
    if (want_grad) {
      model.HeadBackward(term.head, enc, d_logits.transpose(), &out.grad,
                         encoder_grad ? &d_enc : nullptr);
    }
  }
  if (want_grad && encoder_grad && d_enc.size() != 0) model.EncoderBackward(trace, d_enc, &out.grad);
  return out;
}

/// Plain CTC loss of one head, with gradient.
inline LossGrad CtcObjective(const CtcModel& model, const Matrix& features, const std::string& head,
                             std::span<const UnitId> labels, bool want_grad = true) {
  HeadTerm term{head, labels, 1.0};
  return EvaluateTerms(model, features, std::span<const HeadTerm>(&term, 1), want_grad);
}

inline void CheckUnitInterval(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(std::string(name) + " must lie in [0, 1]");
}

/// (1 - alpha) * CTC(sd) + alpha * (-sum_t sum_u P_si ln P_sd) on the primary
/// head. Only the SD model receives gradient.
inline LossGrad KldCtcLoss(const CtcModel& sd, const CtcModel& si, const Matrix& features,
                           std::span<const UnitId> labels, double alpha, bool want_grad = true) {
  CheckUnitInterval(alpha, "alpha");
  const std::string& head = sd.primary_head().name;
  Matrix si_probs;
  if (alpha != 0.0) si_probs = si.Forward(features, head).probs;
  HeadTerm term{head, labels, 1.0 - alpha, alpha != 0.0 ? &si_probs : nullptr, alpha};
  return EvaluateTerms(sd, features, std::span<const HeadTerm>(&term, 1), want_grad);
}

inline const HeadSpec& LetterHeadOf(const CtcModel& model) {
  for (const auto& h : model.heads()) {
    if (h.vocab.kind() == VocabKind::kLetter && h.name != model.primary_head().name) return h;
  }
  throw Error("model has no auxiliary letter head");
}

/// (1 - beta) * CTC(primary head) + beta * CTC(letter head).
inline LossGrad MtlCtcLoss(const CtcModel& sd, const Matrix& features,
                           std::span<const UnitId> primary_labels,
                           std::span<const UnitId> letter_labels, double beta,
                           bool want_grad = true) {
  CheckUnitInterval(beta, "beta");
  const HeadSpec& letter = LetterHeadOf(sd);
  HeadTerm terms[2] = {{sd.primary_head().name, primary_labels, 1.0 - beta},
                       {letter.name, letter_labels, beta}};
  return EvaluateTerms(sd, features, terms, want_grad);
}

// ----------------------------------------------------------------- optimizer

struct TrainLog {
  std::vector<double> epoch_loss;  // mean per-utterance loss over each epoch
  std::size_t skipped = 0;         // infeasible examples, summed over epochs
  std::size_t updates = 0;
};

/// Per-example callback: add the example's gradient into `grad` and return
/// its loss, or nullopt when the example has no feasible target.
using ExampleFn = std::function<std::optional<double>(const CtcModel&, std::size_t, Vector&)>;

/// Mini-batch gradient descent restricted to the groups in `mask`. Groups
/// outside the mask are never written.
inline TrainLog RunGradientDescent(CtcModel& model, std::size_t num_examples, const GroupMask& mask,
                                   const OptimizerConfig& opt, const ExampleFn& example) {
  if (opt.epochs < 0) throw Error("optimizer: epochs must be >= 0");
  if (!(opt.learning_rate > 0.0)) throw Error("optimizer: learning rate must be positive");
  TrainLog log;
  if (num_examples == 0 || opt.epochs == 0) return log;
  const auto& layout = model.params().layout();
  if (mask.trainable.size() != layout.size()) throw Error("optimizer: mask does not match layout");

  Rng rng(opt.seed);
  std::vector<std::size_t> order(num_examples);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch =
      opt.batch_size > 0 ? static_cast<std::size_t>(opt.batch_size) : num_examples;
  const Eigen::Index n = static_cast<Eigen::Index>(model.params().size());
  Vector grad(n), first_moment, second_moment;
  if (opt.kind == OptimizerKind::kAdam) {
    first_moment = Vector::Zero(n);
    second_moment = Vector::Zero(n);
  }
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.Shuffle(order);
    double epoch_loss = 0.0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < num_examples; start += batch) {
      const std::size_t end = std::min(num_examples, start + batch);
      grad.setZero();
      std::size_t used = 0;
      for (std::size_t i = start; i < end; ++i) {
        auto loss = example(model, order[i], grad);
        if (!loss) {
          ++log.skipped;
          continue;
        }
        epoch_loss += *loss;
        ++counted;
        ++used;
      }
      if (used == 0) continue;
      grad /= static_cast<double>(used);
      double norm_sq = 0.0;
      for (std::size_t g = 0; g < layout.size(); ++g) {
        if (!mask[g]) continue;
        norm_sq += grad.segment(static_cast<Eigen::Index>(layout[g].offset),
                                static_cast<Eigen::Index>(layout[g].length))
                       .squaredNorm();
      }
      const double norm = std::sqrt(norm_sq);
      const double scale = (opt.clip > 0.0 && norm > opt.clip) ? opt.clip / norm : 1.0;
      ++log.updates;
      for (std::size_t g = 0; g < layout.size(); ++g) {
        if (!mask[g]) continue;
        const auto off = static_cast<Eigen::Index>(layout[g].offset);
        const auto len = static_cast<Eigen::Index>(layout[g].length);
        auto p = model.params().values().segment(off, len);
        auto gr = grad.segment(off, len);
        if (opt.kind == OptimizerKind::kSgd) {
          p -= (opt.learning_rate * scale) * gr;
        } else {
          auto m = first_moment.segment(off, len);
          auto v = second_moment.segment(off, len);
          m = opt.adam_beta1 * m + (1.0 - opt.adam_beta1) * scale * gr;
          v = opt.adam_beta2 * v + (1.0 - opt.adam_beta2) * (scale * gr).cwiseAbs2();
          const double t = static_cast<double>(log.updates);
          const double c1 = 1.0 - std::pow(opt.adam_beta1, t);
          const double c2 = 1.0 - std::pow(opt.adam_beta2, t);
          p.array() -= opt.learning_rate * (m.array() / c1) /
                       ((v.array() / c2).sqrt() + opt.adam_epsilon);
        }
      }
    }
    log.epoch_loss.push_back(counted ? epoch_loss / static_cast<double>(counted)
                                     : std::numeric_limits<double>::quiet_NaN());
  }
  return log;
}

/// True when a mask touches anything below the softmax heads.
inline bool MaskReachesEncoder(const CtcModel& model, const GroupMask& mask) {
  const auto& layout = model.params().layout();
  for (std::size_t g = 0; g < layout.size(); ++g) {
    if (mask[g] && CtcModel::RoleOf(layout[g].name) != GroupRole::kHead) return true;
  }
  return false;
}

// ------------------------------------------------------------------ training

inline std::vector<std::vector<UnitId>> EncodeTranscripts(const std::vector<Utterance>& utts,
                                                          const Vocabulary& vocab) {
  std::vector<std::vector<UnitId>> out;
  out.reserve(utts.size());
  for (const auto& u : utts) out.push_back(Encode(u.transcript, vocab).ids);
  return out;
}

/// Trains a fresh single-head model with plain CTC. Utterances whose target
/// cannot fit in their frames are skipped and counted in the log.
inline CtcModel TrainSi(const ModelConfig& config, std::uint64_t init_seed,
                        const std::vector<Utterance>& corpus, const OptimizerConfig& opt,
                        TrainLog* log = nullptr) {
  if (corpus.empty()) throw Error("TrainSi: empty training corpus");
  if (config.heads.size() != 1) throw Error("TrainSi: expects exactly one head");
  CtcModel model = CtcModel::Init(config, init_seed);
  const std::string head = model.primary_head().name;
  const auto targets = EncodeTranscripts(corpus, model.primary_head().vocab);
  ExampleFn fn = [&](const CtcModel& m, std::size_t i, Vector& grad) -> std::optional<double> {
    LossGrad lg = CtcObjective(m, corpus[i].features, head, targets[i]);
    if (!lg.feasible) return std::nullopt;
    grad += lg.grad;
    return lg.loss;
  };
  TrainLog l = RunGradientDescent(model, corpus.size(), model.SelectTrainable(UpdateScope::kAll), opt, fn);
  if (log) *log = std::move(l);
  return model;
}

/// Mean CTC loss of `head` over the feasible utterances.
inline double MeanCtcLoss(const CtcModel& model, const std::string& head,
                          const std::vector<Utterance>& utts) {
  const auto targets = EncodeTranscripts(utts, model.head(head).vocab);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    LossGrad lg = CtcObjective(model, utts[i].features, head, targets[i], false);
    if (!lg.feasible) continue;
    total += lg.loss;
    ++n;
  }
  return n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

/// Fits only the auxiliary letter softmax on the training corpus; the
/// encoder and the primary head stay exactly as they were.
inline CtcModel TrainLetterHead(CtcModel model, const std::vector<Utterance>& corpus,
                                const OptimizerConfig& opt, TrainLog* log = nullptr) {
  const HeadSpec letter = LetterHeadOf(model);
  if (corpus.empty()) throw Error("TrainLetterHead: empty training corpus");
  const auto targets = EncodeTranscripts(corpus, letter.vocab);
  // The encoder is frozen, so its outputs can be computed once.
  std::vector<Matrix> encoded;
  encoded.reserve(corpus.size());
  for (const auto& u : corpus) encoded.push_back(model.Encode(u.features, nullptr));
  ExampleFn fn = [&](const CtcModel& m, std::size_t i, Vector& grad) -> std::optional<double> {
    Matrix logits = m.HeadLogits(letter.name, encoded[i]);
    CtcLossResult r = CtcLoss(CtcModel::LatticeFromLogits(logits, letter.name), targets[i]);
    if (!r.feasible) return std::nullopt;
    m.HeadBackward(letter.name, encoded[i], r.grad_logits.transpose(), &grad, nullptr);
    return r.loss;
  };
  TrainLog l = RunGradientDescent(model, corpus.size(), model.MaskForGroup("head." + letter.name), opt, fn);
  if (log) *log = std::move(l);
  return model;
}

// ------------------------------------------------------------- adaptation

/// Targets for one adaptation utterance. `letters` is set only when the
/// model carries an auxiliary letter head.
struct AdaptTargets {
  bool kept = true;
  LabelSequence primary;
  std::optional<LabelSequence> letters;
};

inline WordSeq DecodeWords(const CtcModel& model, const Matrix& features, const std::string& head) {
  return DecodeToWords(model.Forward(features, head), model.head(head).vocab);
}

/// Letter targets for a mix-unit hypothesis: the words it spells, with "$"
/// between them.
inline LabelSequence SpellMixHypothesis(std::span<const UnitId> mix_hyp, const Vocabulary& mix,
                                        const Vocabulary& letters) {
  return EncodeLetters(CollapseToWords(mix_hyp, mix), letters);
}

/// Decoded hypotheses of the SI model used as adaptation references. The
/// primary targets are the primary head's greedy output. Letter targets come
/// from the letter head for word models (word hypotheses contain OOVs) and
/// from spelling the hypothesis for mix-unit models. Utterances with an
/// empty decode are marked not kept.
inline std::vector<AdaptTargets> MakeUnsupervisedTargets(const CtcModel& si,
                                                         const std::vector<Utterance>& utts) {
  const HeadSpec& primary = si.primary_head();
  const HeadSpec* letter = nullptr;
  for (const auto& h : si.heads()) {
    if (h.vocab.kind() == VocabKind::kLetter && h.name != primary.name) letter = &h;
  }
  std::vector<AdaptTargets> out;
  out.reserve(utts.size());
  for (const auto& u : utts) {
    Matrix enc = si.Encode(u.features, nullptr);
    AdaptTargets t;
    auto primary_lattice = CtcModel::LatticeFromLogits(si.HeadLogits(primary.name, enc), primary.name);
    t.primary = LabelSequence{GreedyDecode(primary_lattice), primary.vocab.kind()};
    if (letter) {
      if (primary.vocab.kind() == VocabKind::kMixUnit) {
        t.letters = SpellMixHypothesis(t.primary.ids, primary.vocab, letter->vocab);
      } else {
        auto letter_lattice = CtcModel::LatticeFromLogits(si.HeadLogits(letter->name, enc), letter->name);
        t.letters = LabelSequence{GreedyDecode(letter_lattice), VocabKind::kLetter};
      }
    }
    t.kept = !t.primary.empty() && (!t.letters || !t.letters->empty());
    out.push_back(std::move(t));
  }
  return out;
}

struct AdaptationReport {
  std::string speaker;
  AdaptMethod method = AdaptMethod::kKld;
  Supervision supervision = Supervision::kSupervised;
  std::vector<double> epoch_loss;
  std::vector<std::string> trainable_groups;
  std::vector<std::string> groups_updated;
  std::size_t utterances_available = 0;
  std::size_t utterances_used = 0;
  std::vector<std::string> dropped;
  std::vector<std::string> notes;
  std::uint64_t checksum = 0;
};

struct AdaptResult {
  CtcModel model;
  AdaptationReport report;
};

/// Groups adaptation may change. With an adapter only the adapter groups
/// train, since the point of an adapter is a small speaker footprint. MTL
/// never touches the softmax layers.
inline GroupMask EffectiveAdaptationMask(const CtcModel& model, const AdaptationConfig& cfg) {
  GroupMask mask;
  for (const auto& g : model.params().layout()) {
    const GroupRole role = CtcModel::RoleOf(g.name);
    bool on = false;
    if (cfg.adapter != AdapterKind::kNone) {
      on = role == GroupRole::kAdapter;
    } else if (cfg.method == AdaptMethod::kMtl) {
      on = role != GroupRole::kHead && cfg.scope != UpdateScope::kTop;
    } else {
      on = cfg.scope == UpdateScope::kAll || (cfg.scope == UpdateScope::kHidden && role != GroupRole::kHead) ||
           (cfg.scope == UpdateScope::kTop && role == GroupRole::kHead);
    }
    mask.trainable.push_back(on);
  }
  return mask;
}

inline void ValidateAdaptation(const CtcModel& si, const AdaptationConfig& cfg) {
  CheckUnitInterval(cfg.alpha, "alpha");
  CheckUnitInterval(cfg.beta, "beta");
  if (cfg.utterance_budget < 1) throw Error("adaptation: utterance budget must be >= 1");
  if (cfg.adapter != AdapterKind::kNone && cfg.scope == UpdateScope::kTop) {
    throw Error("adaptation: adapters are hidden-layer transforms and cannot be used with scope Top");
  }
  if (cfg.method == AdaptMethod::kMtl) {
    if (si.primary_head().vocab.kind() == VocabKind::kLetter) {
      throw Error("adaptation: MTL needs a word or mix-unit primary head");
    }
    LetterHeadOf(si);
    if (cfg.scope == UpdateScope::kTop) {
      throw Error("adaptation: MTL keeps both softmax layers fixed, so scope Top trains nothing");
    }
  }
}

/// Adapts a copy of `si` to one speaker. `utts` are that speaker's adaptation
/// utterances in order; the first min(budget, |utts|) are used.
inline AdaptResult AdaptSpeaker(const CtcModel& si, const std::vector<Utterance>& utts,
                                const AdaptationConfig& cfg, const std::string& speaker = "") {
  ValidateAdaptation(si, cfg);
  const FrozenModel frozen = si.CloneFrozen();
  AdaptationReport report;
  report.speaker = speaker;
  report.method = cfg.method;
  report.supervision = cfg.supervision;
  report.utterances_available = utts.size();

  const std::size_t budget = static_cast<std::size_t>(cfg.utterance_budget);
  const std::size_t take = std::min(budget, utts.size());
  if (budget > utts.size()) {
    report.notes.push_back("budget " + std::to_string(budget) + " exceeds the " +
                           std::to_string(utts.size()) + " available utterances; using all");
  }
  std::vector<Utterance> selected(utts.begin(), utts.begin() + static_cast<long>(take));

  const HeadSpec& primary = frozen->primary_head();
  const bool mtl = cfg.method == AdaptMethod::kMtl;
  std::vector<AdaptTargets> targets;
  if (cfg.supervision == Supervision::kSupervised) {
    for (const auto& u : selected) {
      AdaptTargets t;
      t.primary = Encode(u.transcript, primary.vocab);
      if (mtl) t.letters = EncodeLetters(u.transcript, LetterHeadOf(*frozen).vocab);
      targets.push_back(std::move(t));
    }
  } else {
    targets = MakeUnsupervisedTargets(*frozen, selected);
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (targets[i].kept) {
      kept.push_back(i);
    } else {
      report.dropped.push_back(selected[i].id);
    }
  }
  report.utterances_used = kept.size();

  CtcModel model = si;
  if (cfg.adapter == AdapterKind::kScalar) model.AttachScalarAdapter();
  if (cfg.adapter == AdapterKind::kLinear) model.InsertLinearAdapter();
  const CtcModel start = model;
  const GroupMask mask = EffectiveAdaptationMask(model, cfg);
  for (std::size_t g = 0; g < mask.trainable.size(); ++g) {
    if (mask[g]) report.trainable_groups.push_back(model.params().layout()[g].name);
  }
  const bool encoder_grad = MaskReachesEncoder(model, mask);
  const bool use_kld = !mtl && cfg.alpha != 0.0;

  std::vector<Matrix> si_cache;
  if (use_kld && cfg.cache_si_posteriors) {
    for (std::size_t i : kept) si_cache.push_back(frozen->Forward(selected[i].features, primary.name).probs);
  }
  const std::string letter_name = mtl ? LetterHeadOf(model).name : std::string();

  ExampleFn fn = [&](const CtcModel& m, std::size_t k, Vector& grad) -> std::optional<double> {
    const std::size_t i = kept[k];
    const Matrix& feats = selected[i].features;
    std::vector<HeadTerm> terms;
    Matrix si_probs;
    if (mtl) {
      terms.push_back({primary.name, targets[i].primary.ids, 1.0 - cfg.beta});
      terms.push_back({letter_name, targets[i].letters->ids, cfg.beta});
    } else {
      const Matrix* si_ptr = nullptr;
      if (use_kld) {
        if (cfg.cache_si_posteriors) {
          si_ptr = &si_cache[k];
        } else {
          si_probs = frozen->Forward(feats, primary.name).probs;
          si_ptr = &si_probs;
        }
      }
      terms.push_back({primary.name, targets[i].primary.ids, 1.0 - cfg.alpha, si_ptr, cfg.alpha});
    }
    LossGrad lg = EvaluateTerms(m, feats, terms, true, encoder_grad);
    if (!lg.feasible) return std::nullopt;
    grad += lg.grad;
    return lg.loss;
  };
  TrainLog log = RunGradientDescent(model, kept.size(), mask, cfg.optimizer, fn);
  report.epoch_loss = log.epoch_loss;
  if (log.skipped) {
    report.notes.push_back(std::to_string(log.skipped) + " infeasible example visits skipped");
  }
  for (const auto& g : model.params().layout()) {
    if (!ParamVector::BitEqual(model.params().Slice(g), start.params().Slice(g.name))) {
      report.groups_updated.push_back(g.name);
    }
  }
  report.checksum = model.Checksum();
  return {std::move(model), std::move(report)};
}

}  // namespace ctcadapt
