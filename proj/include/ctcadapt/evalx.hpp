// ctcadapt/evalx.hpp

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

#include "ctcadapt/adaptation.hpp"
#include "ctcadapt/corpus.hpp"
#include "ctcadapt/model.hpp"
#include "ctcadapt/random.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace ctcadapt {

struct EvalResult {
  long substitutions = 0;
  long deletions = 0;
  long insertions = 0;
  long ref_words = 0;

  long errors() const { return substitutions + deletions + insertions; }

  /// Percent. With no reference words, insertions count against a
  /// denominator of one.
  double wer() const {
    if (ref_words == 0) return insertions == 0 ? 0.0 : 100.0 * static_cast<double>(insertions);
    return 100.0 * static_cast<double>(errors()) / static_cast<double>(ref_words);
  }

  EvalResult& operator+=(const EvalResult& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    ref_words += o.ref_words;
    return *this;
  }
  bool operator==(const EvalResult&) const = default;
};

/// Minimum edit distance alignment. Among alignments of equal cost the one
/// with fewer substitutions wins, then the one with fewer deletions.
inline EvalResult Wer(const WordSeq& ref, const WordSeq& hyp) {
  using Cost = std::tuple<long, long, long>;  // total, substitutions, deletions
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<Cost> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {static_cast<long>(j), 0, 0};
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {static_cast<long>(i), 0, static_cast<long>(i)};
    for (std::size_t j = 1; j <= m; ++j) {
      auto [dt, ds, dd] = prev[j];
      Cost best{dt + 1, ds, dd + 1};  // deletion
      auto [it, is, id] = cur[j - 1];
      best = std::min(best, Cost{it + 1, is, id});  // insertion
      auto [st, ss, sd] = prev[j - 1];
      if (ref[i - 1] == hyp[j - 1]) {
        best = std::min(best, Cost{st, ss, sd});
      } else {
        best = std::min(best, Cost{st + 1, ss + 1, sd});
      }
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  auto [total, subs, dels] = prev[m];
  EvalResult r;
  r.substitutions = subs;
  r.deletions = dels;
  r.insertions = total - subs - dels;
  r.ref_words = static_cast<long>(n);
  return r;
}

/// 100 * (baseline - adapted) / baseline.
inline double RelativeWerr(double baseline_wer, double adapted_wer) {
  if (!(baseline_wer > 0.0)) throw Error("relative WERR needs a positive baseline WER");
  return 100.0 * (baseline_wer - adapted_wer) / baseline_wer;
}

/// Micro-averaged score of hypotheses against references.
inline EvalResult Score(const std::vector<WordSeq>& refs, const std::vector<WordSeq>& hyps) {
  if (refs.size() != hyps.size()) throw Error("Score: reference and hypothesis counts differ");
  EvalResult total;
  for (std::size_t i = 0; i < refs.size(); ++i) total += Wer(refs[i], hyps[i]);
  return total;
}

inline EvalResult EvaluateModel(const CtcModel& model, const std::vector<Utterance>& utts) {
  EvalResult total;
  const std::string& head = model.primary_head().name;
  for (const auto& u : utts) total += Wer(u.transcript, DecodeWords(model, u.features, head));
  return total;
}

// --------------------------------------------------------------------- sweep

struct SweepSpec {
  AdaptMethod method = AdaptMethod::kKld;
  Supervision supervision = Supervision::kSupervised;
  AdapterKind adapter = AdapterKind::kNone;
  std::vector<UpdateScope> scopes = {UpdateScope::kAll, UpdateScope::kHidden};
  std::vector<int> budgets = {10, 50, 200};
  /// alpha values for KLD, beta values for MTL.
  std::vector<double> weights = {0.0, 0.2, 0.5, 0.8};
  OptimizerConfig optimizer;
  bool cache_si_posteriors = true;
};

struct SweepCell {
  UpdateScope scope = UpdateScope::kAll;
  int budget = 0;
  double weight = 0.0;
  bool ok = true;
  std::string error;
  EvalResult eval;
  double werr = 0.0;
  /// Adaptation utterances actually used, per speaker in sweep order.
  std::vector<std::size_t> utterances_used;

  double wer() const { return eval.wer(); }
};

struct SweepTable {
  SweepSpec spec;
  std::string model;  // primary head of the SI model
  std::vector<std::string> speakers;
  EvalResult baseline;
  std::vector<SweepCell> cells;

  const SweepCell* Find(UpdateScope scope, int budget, double weight) const {
    for (const auto& c : cells) {
      if (c.scope == scope && c.budget == budget && c.weight == weight) return &c;
    }
    return nullptr;
  }

  /// Lowest WER over the weight grid for one (scope, budget) row.
  const SweepCell* Best(UpdateScope scope, int budget) const {
    const SweepCell* best = nullptr;
    for (const auto& c : cells) {
      if (c.ok && c.scope == scope && c.budget == budget && (!best || c.wer() < best->wer())) best = &c;
    }
    return best;
  }
};

inline AdaptationConfig CellConfig(const SweepSpec& spec, UpdateScope scope, int budget, double weight,
                                   const std::string& speaker) {
  AdaptationConfig cfg;
  cfg.method = spec.method;
  cfg.supervision = spec.supervision;
  cfg.adapter = spec.adapter;
  cfg.scope = scope;
  cfg.utterance_budget = budget;
  (spec.method == AdaptMethod::kKld ? cfg.alpha : cfg.beta) = weight;
  cfg.cache_si_posteriors = spec.cache_si_posteriors;
  cfg.optimizer = spec.optimizer;
  // Each speaker gets its own stream so results do not depend on which other
  // speakers take part.
  cfg.optimizer.seed = DeriveSeed(spec.optimizer.seed, "adapt/" + speaker);
  return cfg;
}

/// Adapts every speaker independently from `si` for each grid cell and
/// scores the adapted models on the speakers' test utterances. A failing
/// cell is recorded and the sweep moves on.
inline SweepTable RunSweep(const CtcModel& si, const std::vector<SpeakerData>& speakers,
                           const SweepSpec& spec, std::ostream* progress = nullptr) {
  for (const auto& s : speakers) {
    for (const auto& a : s.adapt) {
      for (const auto& t : s.test) {
        if (a.id == t.id) throw Error("sweep: utterance " + a.id + " is in both adaptation and test sets");
      }
    }
  }
  SweepTable table;
  table.spec = spec;
  table.model = si.primary_head().name;
  for (const auto& s : speakers) {
    table.speakers.push_back(s.speaker);
    table.baseline += EvaluateModel(si, s.test);
  }
  for (UpdateScope scope : spec.scopes) {
    for (int budget : spec.budgets) {
      for (double weight : spec.weights) {
        SweepCell cell;
        cell.scope = scope;
        cell.budget = budget;
        cell.weight = weight;
        try {
          for (const auto& s : speakers) {
            AdaptResult r = AdaptSpeaker(si, s.adapt, CellConfig(spec, scope, budget, weight, s.speaker), s.speaker);
            cell.utterances_used.push_back(r.report.utterances_used);
            cell.eval += EvaluateModel(r.model, s.test);
          }
          cell.werr = table.baseline.wer() > 0.0 ? RelativeWerr(table.baseline.wer(), cell.wer()) : 0.0;
        } catch (const std::exception& e) {
          cell.ok = false;
          cell.error = e.what();
        }
        if (progress) {
          *progress << ToString(spec.method) << ' ' << ToString(spec.supervision) << ' ' << ToString(scope)
                    << " budget=" << budget << " weight=" << weight << " wer="
                    << (cell.ok ? std::to_string(cell.wer()) : "ERR " + cell.error) << '\n';
        }
        table.cells.push_back(std::move(cell));
      }
    }
  }
  return table;
}

inline std::string FormatFixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// Plain-text table: a baseline row, then one row per (scope, budget) and one
/// column per weight, WER to two decimals with WERR to one decimal.
inline std::string RenderTable(const SweepTable& t) {
  const char* weight_name = t.spec.method == AdaptMethod::kKld ? "alpha" : "beta";
  std::ostringstream os;
  if (!t.model.empty()) os << t.model << " model, ";
  os << ToString(t.spec.method) << " adaptation, " << ToString(t.spec.supervision) << ", adapter "
     << ToString(t.spec.adapter) << ", " << t.speakers.size() << " speakers\n";
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"scope", "budget"};
  for (double w : t.spec.weights) header.push_back(std::string(weight_name) + "=" + FormatFixed(w, 2));
  rows.push_back(header);
  std::vector<std::string> base = {"SI", "-"};
  for (std::size_t i = 0; i < t.spec.weights.size(); ++i) base.push_back(FormatFixed(t.baseline.wer(), 2));
  rows.push_back(base);
  for (UpdateScope scope : t.spec.scopes) {
    for (int budget : t.spec.budgets) {
      std::vector<std::string> row = {std::string(ToString(scope)), std::to_string(budget)};
      for (double w : t.spec.weights) {
        const SweepCell* c = t.Find(scope, budget, w);
        if (!c || !c->ok) {
          row.emplace_back("ERR");
        } else {
          row.push_back(FormatFixed(c->wer(), 2) + " (" + FormatFixed(c->werr, 1) + ")");
        }
      }
      rows.push_back(row);
    }
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      os << r[i];
      if (i + 1 < r.size()) os << std::string(width[i] - r[i].size() + 2, ' ');
    }
    os << '\n';
  }
  for (const auto& c : t.cells) {
    if (!c.ok) {
      os << "# failed " << ToString(c.scope) << " budget=" << c.budget << " " << weight_name << "="
         << FormatFixed(c.weight, 2) << ": " << c.error << '\n';
    }
  }
  return os.str();
}

inline constexpr std::string_view kCsvHeader = "scope,budget,method,alpha,beta,wer,werr";

/// Comma-separated rows; baseline rows carry scope "SI" and budget 0.
inline std::string RenderCsv(const SweepTable& t) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  const bool kld = t.spec.method == AdaptMethod::kKld;
  auto line = [&](const std::string& scope, int budget, double w, const std::string& wer, const std::string& werr) {
    os << scope << ',' << budget << ',' << ToString(t.spec.method) << ',' << FormatFixed(kld ? w : 0.0, 2) << ','
       << FormatFixed(kld ? 0.0 : w, 2) << ',' << wer << ',' << werr << '\n';
  };
  for (double w : t.spec.weights) line("SI", 0, w, FormatFixed(t.baseline.wer(), 2), FormatFixed(0.0, 1));
  for (UpdateScope scope : t.spec.scopes) {
    for (int budget : t.spec.budgets) {
      for (double w : t.spec.weights) {
        const SweepCell* c = t.Find(scope, budget, w);
        if (!c || !c->ok) {
          line(std::string(ToString(scope)), budget, w, "ERR", "ERR");
        } else {
          line(std::string(ToString(scope)), budget, w, FormatFixed(c->wer(), 2), FormatFixed(c->werr, 1));
        }
      }
    }
  }
  return os.str();
}

}  // namespace ctcadapt
