// tests/acceptance.cpp

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

// Acceptance run. Prints one PASS/FAIL line per criterion, with indented
// detail lines below it, and exits non-zero if any criterion fails.
//
//   acceptance [--only N]... [--tables FILE]

#include "ctcadapt/adaptation.hpp"
#include "ctcadapt/config.hpp"
#include "ctcadapt/corpus.hpp"
#include "ctcadapt/ctc.hpp"
#include "ctcadapt/evalx.hpp"
#include "ctcadapt/model.hpp"
#include "ctcadapt/pipeline.hpp"
#include "test_util.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

namespace ctcadapt {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void Check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void Note(const std::string& what) { details.push_back("     " + what); }
};

std::string Sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

// ------------------------------------------------------------------ 1

Outcome CtcOracle() {
  Outcome out;
  const auto start = Clock::now();
  Rng rng(1001);
  double worst = 0.0;
  int instances = 0, infeasible_agree = 0, mismatched = 0;
  for (; instances < 2000; ++instances) {
    const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.Index(8));
    const Eigen::Index U = 2 + static_cast<Eigen::Index>(rng.Index(4));
    auto lattice = testing::RandomLattice(rng, T, U);
    auto labels = testing::RandomLabels(rng, 4, U);
    auto brute = CtcLossBruteForce(lattice, labels);
    auto fast = CtcLoss(lattice, labels);
    if (!brute) {
      if (fast.feasible) ++mismatched;
      ++infeasible_agree;
      continue;
    }
    if (!fast.feasible) {
      ++mismatched;
      continue;
    }
    worst = std::max(worst, std::abs(fast.loss - *brute));
  }
  const double secs = Seconds(start);
  out.Check(worst <= 1e-10, std::to_string(instances) + " instances, max |forward-backward - enumeration| = " +
                                Sci(worst) + " (limit 1e-10)");
  out.Check(mismatched == 0, "feasibility agrees on every instance (" + std::to_string(infeasible_agree) +
                                 " infeasible)");
  out.Check(secs < 60.0, "runtime " + FormatFixed(secs, 2) + " s (limit 60 s)");
  return out;
}

// ------------------------------------------------------------------ 2

Outcome PathSets() {
  Outcome out;
  const auto start = Clock::now();
  long cases = 0, wrong = 0;
  for (std::size_t U = 1; U <= 4; ++U) {
    const UnitId blank = static_cast<UnitId>(U) - 1;
    // All label sequences of length <= 3 over the non-blank units.
    std::vector<std::vector<UnitId>> label_sets = {{}};
    for (std::size_t k = 0; k < label_sets.size(); ++k) {
      if (label_sets[k].size() == 3) continue;
      for (UnitId u = 0; u < blank; ++u) {
        auto next = label_sets[k];
        next.push_back(u);
        label_sets.push_back(next);
      }
    }
    for (std::size_t T = 1; T <= 6; ++T) {
      std::size_t total = 1;
      for (std::size_t t = 0; t < T; ++t) total *= U;
      for (const auto& labels : label_sets) {
        std::vector<CtcPath> expect;
        CtcPath path(T);
        for (std::size_t code = 0; code < total; ++code) {
          std::size_t c = code;
          for (std::size_t t = T; t-- > 0;) {
            path[t] = static_cast<UnitId>(c % U);
            c /= U;
          }
          if (Collapse(path, blank) == labels) expect.push_back(path);
        }
        ++cases;
        if (ExpandPaths(labels, T, U) != expect) ++wrong;
      }
    }
  }
  const double secs = Seconds(start);
  out.Check(wrong == 0, std::to_string(cases) + " (labels, T, U) cases, " + std::to_string(wrong) +
                            " differ from the filtered U^T enumeration");
  out.Check(secs < 60.0, "runtime " + FormatFixed(secs, 2) + " s (limit 60 s)");
  return out;
}

// ------------------------------------------------------------------ 3

CtcModel GradModel(Rng& rng, std::uint64_t seed) {
  ModelConfig c;
  c.feature_dim = 3;
  c.hidden = {8, 8};
  c.heads = {HeadSpec{"word", testing::ToyWordVocab(3)}};
  CtcModel m = CtcModel::Init(c, seed);
  m.AttachLetterHead(Vocabulary(VocabKind::kLetter, {"a", "b", "$", "<blk>"}));
  testing::RandomizeParams(m, rng);
  return m;
}

std::vector<UnitId> FeasibleLabels(Rng& rng, std::size_t max_len, UnitId units, Eigen::Index T) {
  for (;;) {
    std::vector<UnitId> l(1 + rng.Index(max_len));
    for (auto& u : l) u = static_cast<UnitId>(rng.Index(static_cast<std::uint64_t>(units)));
    if (MinimumFrames(l) <= static_cast<std::size_t>(T)) return l;
  }
}

double GradError(const CtcModel& model, const std::function<LossGrad(const CtcModel&, bool)>& loss) {
  LossGrad lg = loss(model, true);
  Vector fd = FiniteDiffGrad(
      [&](const ParamVector& p) {
        CtcModel probe = model;
        probe.params() = p;
        return loss(probe, false).loss;
      },
      model.params(), 1e-5);
  return MaxRelativeError(lg.grad, fd);
}

Outcome Gradients() {
  Outcome out;
  Rng rng(3003);
  const int kInstances = 20;
  auto instance = [&](int i, auto&& make_loss) {
    CtcModel m = GradModel(rng, 100 + static_cast<std::uint64_t>(i));
    const Eigen::Index T = 2 + static_cast<Eigen::Index>(rng.Index(5));
    Matrix x = testing::RandomFeatures(rng, T, 3);
    return make_loss(m, x, T);
  };
  double worst = 0.0;
  for (int i = 0; i < kInstances; ++i) {
    worst = std::max(worst, instance(i, [&](const CtcModel& m, const Matrix& x, Eigen::Index T) {
      auto labels = FeasibleLabels(rng, 3, 4, T);
      return GradError(m, [&](const CtcModel& p, bool g) { return CtcObjective(p, x, "word", labels, g); });
    }));
  }
  out.Check(worst < 1e-4, "ctc: " + std::to_string(kInstances) + " instances, max relative error " + Sci(worst));
  for (double alpha : {0.0, 0.2, 0.5, 0.8, 1.0}) {
    worst = 0.0;
    for (int i = 0; i < kInstances; ++i) {
      worst = std::max(worst, instance(i, [&](const CtcModel& m, const Matrix& x, Eigen::Index T) {
        CtcModel si = m;
        testing::RandomizeParams(si, rng);
        auto labels = FeasibleLabels(rng, 3, 4, T);
        return GradError(m, [&](const CtcModel& p, bool g) { return KldCtcLoss(p, si, x, labels, alpha, g); });
      }));
    }
    out.Check(worst < 1e-4, "kld alpha=" + FormatFixed(alpha, 1) + ": " + std::to_string(kInstances) +
                                " instances, max relative error " + Sci(worst));
  }
  for (double beta : {0.0, 0.2, 0.5, 0.8, 1.0}) {
    worst = 0.0;
    for (int i = 0; i < kInstances; ++i) {
      worst = std::max(worst, instance(i, [&](const CtcModel& m, const Matrix& x, Eigen::Index T) {
        auto words = FeasibleLabels(rng, 2, 4, T);
        auto letters = FeasibleLabels(rng, 3, 3, T);
        return GradError(m, [&](const CtcModel& p, bool g) { return MtlCtcLoss(p, x, words, letters, beta, g); });
      }));
    }
    out.Check(worst < 1e-4, "mtl beta=" + FormatFixed(beta, 1) + ": " + std::to_string(kInstances) +
                                " instances, max relative error " + Sci(worst));
  }
  return out;
}

// ------------------------------------------------------------------ 4

bool SameBits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

Outcome Reductions() {
  Outcome out;
  Rng rng(4004);
  int kld_bad = 0, mtl0_bad = 0, mtl1_bad = 0;
  for (int i = 0; i < 50; ++i) {
    CtcModel m = GradModel(rng, 200 + static_cast<std::uint64_t>(i));
    CtcModel si = m;
    testing::RandomizeParams(si, rng);
    const Eigen::Index T = 2 + static_cast<Eigen::Index>(rng.Index(5));
    Matrix x = testing::RandomFeatures(rng, T, 3);
    auto words = FeasibleLabels(rng, 2, 4, T);
    auto letters = FeasibleLabels(rng, 3, 3, T);
    LossGrad ctc = CtcObjective(m, x, "word", words);
    LossGrad letter = CtcObjective(m, x, "letter", letters);
    LossGrad k0 = KldCtcLoss(m, si, x, words, 0.0);
    LossGrad b0 = MtlCtcLoss(m, x, words, letters, 0.0);
    LossGrad b1 = MtlCtcLoss(m, x, words, letters, 1.0);
    if (!SameBits(k0.loss, ctc.loss) || !ParamVector::BitEqual(k0.grad, ctc.grad)) ++kld_bad;
    if (!SameBits(b0.loss, ctc.loss) || !ParamVector::BitEqual(b0.grad, ctc.grad)) ++mtl0_bad;
    if (!SameBits(b1.loss, letter.loss) || !ParamVector::BitEqual(b1.grad, letter.grad)) ++mtl1_bad;
  }
  out.Check(kld_bad == 0, "alpha=0 loss and gradient bit-equal plain CTC on 50 instances");
  out.Check(mtl0_bad == 0, "beta=0 bit-equals the primary-head CTC loss on 50 instances");
  out.Check(mtl1_bad == 0, "beta=1 bit-equals the letter-head CTC loss on 50 instances");
  double self = 0.0, min_kld = 1e300;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.Index(8));
    const Eigen::Index U = 2 + static_cast<Eigen::Index>(rng.Index(30));
    auto p = testing::RandomLattice(rng, T, U);
    auto q = testing::RandomLattice(rng, T, U);
    self = std::max(self, std::abs(KldTerm(p, p)));
    min_kld = std::min(min_kld, KldTerm(p, q));
  }
  out.Check(self <= 1e-12, "kld_term(P, P) max " + Sci(self) + " over 1000 lattices (limit 1e-12)");
  out.Check(min_kld >= 0.0, "kld_term(P, Q) min " + Sci(min_kld) + " over 1000 pairs (must be >= 0)");
  return out;
}

// ------------------------------------------------------------------ 5

Outcome FreezeContracts() {
  Outcome out;
  CorpusGenConfig cfg;
  cfg.words = {"the", "cat", "sat", "on", "a", "mat", "dog", "ran", "far", "home"};
  cfg.feature_dim = 6;
  cfg.train_speakers = 4;
  cfg.test_speakers = 2;
  cfg.train_utts_per_speaker = 40;
  cfg.adapt_utts_per_speaker = 8;
  cfg.test_utts_per_speaker = 2;
  cfg.seed = 55;
  auto g = GenerateSyntheticCorpus(cfg);
  auto train = SelectSplit(g.utterances, Split::kTrain);
  auto speakers = GroupSpeakers(g.utterances);
  RunConfig run;
  run.seed = 55;
  run.corpus = cfg;
  run.model.hidden = {8, 8};
  run.vocab.word_min_count = 2;
  run.si_training.kind = OptimizerKind::kAdam;
  run.si_training.learning_rate = 0.01;
  run.si_training.epochs = 30;
  run.si_training.batch_size = 8;
  run.letter_head_training = run.si_training;
  CtcModel si = AddLetterHead(TrainSiModel(run, train, VocabKind::kWord), train, run);

  int runs = 0, head_bad = 0, enc_bad = 0, moved = 0;
  for (auto method : {AdaptMethod::kKld, AdaptMethod::kMtl}) {
    for (auto scope : {UpdateScope::kHidden, UpdateScope::kTop}) {
      if (method == AdaptMethod::kMtl && scope == UpdateScope::kTop) continue;
      for (auto sup : {Supervision::kSupervised, Supervision::kUnsupervised}) {
        for (auto adapter : {AdapterKind::kNone, AdapterKind::kScalar, AdapterKind::kLinear}) {
          if (scope == UpdateScope::kTop && adapter != AdapterKind::kNone) continue;
          AdaptationConfig a;
          a.method = method;
          a.scope = scope;
          a.supervision = sup;
          a.adapter = adapter;
          a.alpha = 0.3;
          a.beta = 0.5;
          a.utterance_budget = 8;
          a.optimizer.epochs = 3;
          a.optimizer.batch_size = 4;
          AdaptResult r = AdaptSpeaker(si, speakers[0].adapt, a, speakers[0].speaker);
          ++runs;
          if (!r.report.groups_updated.empty()) {
            ++moved;
          } else {
            out.Note(std::string("no update: ") + std::string(ToString(method)) + " " + std::string(ToString(scope)) + " " + std::string(ToString(sup)) + " " +
                     std::string(ToString(adapter)) + ", " + std::to_string(r.report.utterances_used) + " utterances used");
          }
          if (scope == UpdateScope::kHidden &&
              r.model.RoleChecksum(GroupRole::kHead) != si.RoleChecksum(GroupRole::kHead)) {
            ++head_bad;
          }
          if (scope == UpdateScope::kTop &&
              r.model.RoleChecksum(GroupRole::kEncoder) != si.RoleChecksum(GroupRole::kEncoder)) {
            ++enc_bad;
          }
        }
      }
    }
  }
  out.Check(head_bad == 0, "scope=Hidden: both softmax heads bit-identical in every KLD and MTL run");
  out.Check(enc_bad == 0, "scope=Top: every encoder group bit-identical");
  out.Check(moved == runs, std::to_string(moved) + " of " + std::to_string(runs) + " runs changed some parameters");

  Rng rng(5005);
  int adapter_bad = 0;
  for (int i = 0; i < 20; ++i) {
    ModelConfig c;
    c.feature_dim = 4;
    c.hidden = {3 + static_cast<int>(rng.Index(5)), 3 + static_cast<int>(rng.Index(5)), 4};
    c.heads = {HeadSpec{"letter", LetterVocabulary()}};
    CtcModel m = CtcModel::Init(c, 300 + static_cast<std::uint64_t>(i));
    testing::RandomizeParams(m, rng);
    Matrix x = testing::RandomFeatures(rng, 1 + static_cast<Eigen::Index>(rng.Index(10)), 4);
    const Matrix before = m.Forward(x, "letter").probs;
    CtcModel s = m, l = m;
    s.AttachScalarAdapter();
    l.InsertLinearAdapter();
    if (!ParamVector::BitEqual(before.reshaped(), s.Forward(x, "letter").probs.reshaped())) ++adapter_bad;
    if (!ParamVector::BitEqual(before.reshaped(), l.Forward(x, "letter").probs.reshaped())) ++adapter_bad;
  }
  out.Check(adapter_bad == 0, "freshly attached scalar and linear adapters leave forward output bit-identical (20 models)");
  return out;
}

// ------------------------------------------------------------------ 6

Outcome AdapterCounts() {
  Outcome out;
  const auto scalar = CtcModel::ScalarAdapterSize(std::vector<int>(6, 512));
  const auto linear = CtcModel::LinearAdapterSize(1024);
  out.Check(scalar == 12288, "scalar adapter, 6 layers x 1024 outputs: " + std::to_string(scalar) + " (expect 12288)");
  out.Check(linear == 1049600, "linear adapter, width 1024: " + std::to_string(linear) + " (expect 1049600)");
  // The same formulas describe what attaching actually allocates.
  ModelConfig c;
  c.feature_dim = 4;
  c.hidden = {5, 7, 6};
  c.heads = {HeadSpec{"letter", LetterVocabulary()}};
  CtcModel s = CtcModel::Init(c, 1), l = CtcModel::Init(c, 1);
  s.AttachScalarAdapter();
  l.InsertLinearAdapter();
  out.Check(s.AdapterParamCount() == CtcModel::ScalarAdapterSize(c.hidden) &&
                l.AdapterParamCount() == CtcModel::LinearAdapterSize(14),
            "attached adapter sizes match the formulas on a 3-layer model");
  return out;
}

// ------------------------------------------------------------------ 7

Outcome WerOracle() {
  Outcome out;
  const auto seqs = testing::AllSequences({"a", "b", "c"}, 5);
  long pairs = 0, wrong = 0;
  for (const auto& ref : seqs) {
    for (const auto& hyp : seqs) {
      ++pairs;
      auto [total, subs, dels] = testing::BruteForceAlignment(ref, hyp);
      EvalResult r = Wer(ref, hyp);
      if (r.errors() != total || r.substitutions != subs || r.deletions != dels) ++wrong;
    }
  }
  out.Check(wrong == 0, std::to_string(pairs) + " sequence pairs (lengths <= 5, 3 words): " + std::to_string(wrong) +
                            " disagree with exhaustive alignment search");
  const std::string t3 = FormatFixed(RelativeWerr(23.14, 20.30), 1);
  const std::string t6 = FormatFixed(RelativeWerr(13.88, 12.66), 1);
  out.Check(t3 == "12.3", "relative_werr(23.14, 20.30) = " + t3 + " (expect 12.3)");
  out.Check(t6 == "8.8", "relative_werr(13.88, 12.66) = " + t6 + " (expect 8.8)");
  return out;
}

// ------------------------------------------------------------------ 8

RunConfig TrendConfig(std::uint64_t seed) {
  RunConfig run;
  run.seed = seed;
  run.corpus.seed = seed;
  run.corpus.feature_dim = 12;
  run.corpus.noise = 0.8;
  run.corpus.accent = 0.6;
  run.corpus.test_speakers = 5;
  run.corpus.adapt_utts_per_speaker = 200;
  run.corpus.test_utts_per_speaker = 40;
  run.vocab.word_min_count = 40;
  run.model.hidden = {16, 16};
  run.si_training.kind = OptimizerKind::kAdam;
  run.si_training.learning_rate = 0.01;
  run.si_training.epochs = 15;
  run.si_training.batch_size = 8;
  run.si_training.seed = seed;
  run.letter_head_training = run.si_training;
  run.adaptation.optimizer.kind = OptimizerKind::kSgd;
  run.adaptation.optimizer.learning_rate = 0.05;
  run.adaptation.optimizer.epochs = 10;
  run.adaptation.optimizer.batch_size = 10;
  run.adaptation.optimizer.seed = seed;
  return run;
}

struct TrendTables {
  SweepTable letter_sup, letter_uns, kld_sup, kld_uns, mtl_sup, mtl_uns;
};

SweepSpec TrendSpec(const RunConfig& run, AdaptMethod method, Supervision sup) {
  SweepSpec s;
  s.method = method;
  s.supervision = sup;
  s.scopes = {UpdateScope::kHidden};
  s.budgets = {10, 50, 200};
  s.weights = method == AdaptMethod::kKld ? std::vector<double>{0.0, 0.2, 0.5, 0.8}
                                          : std::vector<double>{0.2, 0.5, 0.8, 1.0};
  s.optimizer = run.adaptation.optimizer;
  s.cache_si_posteriors = true;
  return s;
}

TrendTables RunTrendSeed(std::uint64_t seed) {
  const RunConfig run = TrendConfig(seed);
  auto g = GenerateSyntheticCorpus(run.corpus);
  auto train = SelectSplit(g.utterances, Split::kTrain);
  auto speakers = GroupSpeakers(g.utterances);
  CtcModel letter = TrainSiModel(run, train, VocabKind::kLetter);
  CtcModel word = AddLetterHead(TrainSiModel(run, train, VocabKind::kWord), train, run);
  TrendTables t;
  t.letter_sup = RunSweep(letter, speakers, TrendSpec(run, AdaptMethod::kKld, Supervision::kSupervised));
  t.letter_uns = RunSweep(letter, speakers, TrendSpec(run, AdaptMethod::kKld, Supervision::kUnsupervised));
  t.kld_sup = RunSweep(word, speakers, TrendSpec(run, AdaptMethod::kKld, Supervision::kSupervised));
  t.kld_uns = RunSweep(word, speakers, TrendSpec(run, AdaptMethod::kKld, Supervision::kUnsupervised));
  t.mtl_sup = RunSweep(word, speakers, TrendSpec(run, AdaptMethod::kMtl, Supervision::kSupervised));
  t.mtl_uns = RunSweep(word, speakers, TrendSpec(run, AdaptMethod::kMtl, Supervision::kUnsupervised));
  return t;
}

double BestWer(const SweepTable& t, int budget) {
  const SweepCell* c = t.Best(UpdateScope::kHidden, budget);
  return c ? c->wer() : std::numeric_limits<double>::infinity();
}
double BestWerr(const SweepTable& t, int budget) {
  const SweepCell* c = t.Best(UpdateScope::kHidden, budget);
  return c ? c->werr : -std::numeric_limits<double>::infinity();
}

bool Monotone(const SweepTable& t) {
  const double w10 = BestWer(t, 10), w50 = BestWer(t, 50), w200 = BestWer(t, 200);
  return w10 >= w50 && w50 >= w200 && w200 < w10;
}

Outcome Trends(std::ostream* tables) {
  Outcome out;
  const auto start = Clock::now();
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  int a = 0, b = 0, c_sup = 0, c_uns = 0, d = 0;
  for (auto seed : seeds) {
    const auto seed_start = Clock::now();
    TrendTables t = RunTrendSeed(seed);
    if (tables) {
      *tables << "==== seed " << seed << "\n";
      for (const SweepTable* s : {&t.letter_sup, &t.letter_uns, &t.kld_sup, &t.kld_uns, &t.mtl_sup, &t.mtl_uns}) {
        *tables << RenderTable(*s) << '\n';
      }
    }
    const bool sa = Monotone(t.letter_sup) && Monotone(t.kld_sup) && Monotone(t.mtl_sup);
    const bool sb = BestWerr(t.letter_sup, 200) >= 5.0;
    const bool sc_sup = BestWer(t.mtl_sup, 200) <= BestWer(t.kld_sup, 200);
    const bool sc_uns = BestWer(t.mtl_uns, 200) <= BestWer(t.kld_uns, 200);
    bool sd = true;
    for (int budget : {10, 50, 200}) {
      sd = sd && BestWerr(t.letter_uns, budget) <= BestWerr(t.letter_sup, budget) &&
           BestWerr(t.kld_uns, budget) <= BestWerr(t.kld_sup, budget) &&
           BestWerr(t.mtl_uns, budget) <= BestWerr(t.mtl_sup, budget);
    }
    a += sa;
    b += sb;
    c_sup += sc_sup;
    c_uns += sc_uns;
    d += sd;
    std::ostringstream note;
    note << "seed " << seed << " (" << FormatFixed(Seconds(seed_start), 0) << " s): letter SI "
         << FormatFixed(t.letter_sup.baseline.wer(), 2) << "% -> " << FormatFixed(BestWer(t.letter_sup, 200), 2)
         << "% (WERR " << FormatFixed(BestWerr(t.letter_sup, 200), 1) << "); word SI "
         << FormatFixed(t.kld_sup.baseline.wer(), 2) << "%, budget 200 sup KLD/MTL "
         << FormatFixed(BestWer(t.kld_sup, 200), 2) << "/" << FormatFixed(BestWer(t.mtl_sup, 200), 2)
         << ", unsup KLD/MTL " << FormatFixed(BestWer(t.kld_uns, 200), 2) << "/"
         << FormatFixed(BestWer(t.mtl_uns, 200), 2) << "; a=" << sa << " b=" << sb << " c=" << sc_sup << sc_uns
         << " d=" << sd;
    out.Note(note.str());
  }
  const int need = static_cast<int>(seeds.size()) / 2 + 1;
  auto tally = [&](int n) { return std::to_string(n) + "/" + std::to_string(seeds.size()) + " seeds"; };
  out.Check(a >= need, "(a) supervised best WER non-increasing over budgets 10, 50, 200 for letter KLD, word KLD "
                       "and word MTL: " + tally(a));
  out.Check(b >= need, "(b) letter model supervised WERR >= 5% at budget 200: " + tally(b));
  out.Check(c_sup >= need, "(c) word model, supervised: best MTL WER <= best KLD WER at budget 200: " + tally(c_sup));
  out.Check(c_uns >= need, "(c) word model, unsupervised: best MTL WER <= best KLD WER at budget 200: " + tally(c_uns));
  out.Check(d >= need, "(d) unsupervised WERR <= supervised WERR at every budget, every method: " + tally(d));
  const double secs = Seconds(start);
  out.Check(secs < 1800.0, "runtime " + FormatFixed(secs, 0) + " s for 3 seeds (limit 1800 s)");
  return out;
}

// ------------------------------------------------------------------ 9

std::string Slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

RunConfig SmallPipelineConfig() {
  RunConfig run;
  run.seed = 9;
  run.corpus.seed = 9;
  run.corpus.vocab_size = 15;
  run.corpus.feature_dim = 6;
  run.corpus.train_speakers = 4;
  run.corpus.test_speakers = 2;
  run.corpus.train_utts_per_speaker = 12;
  run.corpus.adapt_utts_per_speaker = 10;
  run.corpus.test_utts_per_speaker = 5;
  run.corpus.accent = 0.3;
  run.vocab.word_min_count = 3;
  run.model.hidden = {6, 6};
  run.si_training.kind = OptimizerKind::kAdam;
  run.si_training.learning_rate = 0.01;
  run.si_training.epochs = 3;
  run.si_training.batch_size = 8;
  run.si_training.seed = 9;
  run.letter_head_training = run.si_training;
  run.adaptation.optimizer.epochs = 2;
  run.adaptation.optimizer.batch_size = 5;
  run.adaptation.optimizer.seed = 9;
  return run;
}

// Generate, persist, reload, train, checkpoint, reload, sweep. Returns the
// CSV of the final table.
std::string RunPipeline(const fs::path& dir) {
  const RunConfig run = SmallPipelineConfig();
  fs::remove_all(dir);
  WriteCorpus((dir / "corpus").string(), GenerateSyntheticCorpus(run.corpus));
  auto utts = LoadCorpus((dir / "corpus").string(), run.corpus.feature_dim);
  auto train = SelectSplit(utts, Split::kTrain);
  CtcModel word = AddLetterHead(TrainSiModel(run, train, VocabKind::kWord), train, run);
  word.Save((dir / "word.ckpt").string());
  CtcModel reloaded = CtcModel::Load((dir / "word.ckpt").string());
  SweepSpec spec = TrendSpec(run, AdaptMethod::kMtl, Supervision::kSupervised);
  spec.budgets = {5, 10};
  spec.weights = {0.5};
  return RenderCsv(RunSweep(reloaded, GroupSpeakers(utts), spec));
}

Outcome Persistence() {
  Outcome out;
  const fs::path root = fs::temp_directory_path() / ("ctcadapt-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);

  Rng rng(9009);
  ModelConfig c;
  c.feature_dim = 5;
  c.hidden = {4, 6, 5};
  c.heads = {HeadSpec{"word", testing::ToyWordVocab(7)}};
  CtcModel m = CtcModel::Init(c, 77);
  m.AttachLetterHead(LetterVocabulary());
  m.AttachScalarAdapter();
  m.InsertLinearAdapter();
  testing::RandomizeParams(m, rng);
  fs::create_directories(root);
  m.Save((root / "m.ckpt").string());
  CtcModel back = CtcModel::Load((root / "m.ckpt").string());
  back.Save((root / "m2.ckpt").string());
  out.Check(back == m && Slurp(root / "m.ckpt") == Slurp(root / "m2.ckpt"),
            "checkpoint load(save(m)) bit-identical, re-save byte-identical");

  auto g = GenerateSyntheticCorpus(SmallPipelineConfig().corpus);
  WriteCorpus((root / "c").string(), g);
  auto loaded = LoadCorpus((root / "c").string());
  bool same = loaded.size() == g.utterances.size();
  for (std::size_t i = 0; same && i < loaded.size(); ++i) {
    same = loaded[i].id == g.utterances[i].id && loaded[i].speaker == g.utterances[i].speaker &&
           loaded[i].split == g.utterances[i].split && loaded[i].transcript == g.utterances[i].transcript &&
           ParamVector::BitEqual(loaded[i].features.reshaped(), g.utterances[i].features.reshaped());
  }
  out.Check(same, "corpus write/load round trip bit-identical (" + std::to_string(loaded.size()) + " utterances)");

  const std::string first = RunPipeline(root / "run1");
  const std::string second = RunPipeline(root / "run2");
  out.Check(first == second && !first.empty(), "two full pipeline runs with equal seeds give identical result tables");
  bool corpus_bytes = true;
  for (const auto& e : fs::directory_iterator(root / "run1" / "corpus" / "feats")) {
    corpus_bytes = corpus_bytes && Slurp(e.path()) == Slurp(root / "run2" / "corpus" / "feats" / e.path().filename());
  }
  corpus_bytes = corpus_bytes && Slurp(root / "run1" / "corpus" / "manifest.tsv") ==
                                     Slurp(root / "run2" / "corpus" / "manifest.tsv");
  out.Check(corpus_bytes, "generated corpora byte-identical across the two runs");
  fs::remove_all(root);
  return out;
}

}  // namespace
}  // namespace ctcadapt

int main(int argc, char** argv) {
  using namespace ctcadapt;
  std::set<int> only;
  std::string tables_path;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else if (!std::strcmp(argv[i], "--tables") && i + 1 < argc) {
      tables_path = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--only N]... [--tables FILE]\n";
      return 2;
    }
  }
  std::ofstream tables;
  if (!tables_path.empty()) tables.open(tables_path);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "CTC oracle equivalence", CtcOracle},
      {2, "path-set exactness", PathSets},
      {3, "gradient checks", Gradients},
      {4, "reduction identities", Reductions},
      {5, "freeze contracts", FreezeContracts},
      {6, "adapter parameter counts", AdapterCounts},
      {7, "WER oracle", WerOracle},
      {8, "desk-scale trend reproduction", [&] { return Trends(tables.is_open() ? &tables : nullptr); }},
      {9, "persistence", Persistence},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.Check(false, std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << "  ("
              << FormatFixed(Seconds(start), 1) << " s)\n";
    for (const auto& d : o.details) std::cout << "        " << d << '\n';
    std::cout.flush();
  }
  return failed == 0 ? 0 : 1;
}
