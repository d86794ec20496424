// ctcadapt/ctc.hpp

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
#include "ctcadapt/targets.hpp"

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctcadapt {

/// Per-frame posteriors of one softmax head: T rows (frames) by U columns
/// (units, blank last). Rows are probability distributions.
struct PosteriorLattice {
  Matrix probs;
  std::string head;

  Eigen::Index frames() const { return probs.rows(); }
  Eigen::Index units() const { return probs.cols(); }
  UnitId blank_id() const { return static_cast<UnitId>(probs.cols()) - 1; }
};

/// A frame-level unit sequence, blanks included.
using CtcPath = std::vector<UnitId>;

struct CtcLossResult {
  bool feasible = true;
  /// -ln P(labels | x); +inf when infeasible.
  double loss = 0.0;
  /// d loss / d pre-softmax logits, T x U. Empty when infeasible.
  Matrix grad_logits;
};

/// Merge repeated labels, then drop blanks.
inline std::vector<UnitId> Collapse(std::span<const UnitId> path, UnitId blank) {
  std::vector<UnitId> out;
  UnitId prev = -1;
  for (UnitId u : path) {
    if (u != prev && u != blank) out.push_back(u);
    prev = u;
  }
  return out;
}

/// Shortest path length able to emit `labels`: one frame per label plus one
/// separating blank per adjacent repeat.
inline std::size_t MinimumFrames(std::span<const UnitId> labels) {
  std::size_t n = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) ++n;
  }
  return n;
}

namespace internal {

// Depth-first walk of the blank-interleaved state graph.
inline void ExpandFrom(const std::vector<UnitId>& ext, std::size_t state, std::size_t t,
                       std::size_t frames, CtcPath& prefix, std::vector<CtcPath>& out) {
  prefix.push_back(ext[state]);
  if (t + 1 == frames) {
    if (state + 1 >= ext.size() - 1) out.push_back(prefix);
  } else {
    const std::size_t remaining = frames - t - 1;
    auto try_state = [&](std::size_t s) {
      // Prune states that can no longer reach the end in time.
      std::size_t needed = (ext.size() - 1 - s) / 2;
      if (needed > remaining) return;
      ExpandFrom(ext, s, t + 1, frames, prefix, out);
    };
    try_state(state);
    if (state + 1 < ext.size()) try_state(state + 1);
    if (state + 2 < ext.size() && ext[state + 2] != ext[0] && ext[state + 2] != ext[state]) {
      try_state(state + 2);
    }
  }
  prefix.pop_back();
}

inline std::vector<UnitId> Interleave(std::span<const UnitId> labels, UnitId blank) {
  std::vector<UnitId> ext;
  ext.reserve(2 * labels.size() + 1);
  ext.push_back(blank);
  for (UnitId l : labels) {
    ext.push_back(l);
    ext.push_back(blank);
  }
  return ext;
}

inline void CheckLabels(std::span<const UnitId> labels, Eigen::Index units) {
  for (UnitId l : labels) {
    if (l < 0 || l >= units - 1) throw Error("CTC: label id out of range or blank");
  }
}

}  // namespace internal

/// Every length-T path that collapses to `labels`, in lexicographic order.
/// Blank is unit U-1. Limited to T <= 10 and U <= 6.
inline std::vector<CtcPath> ExpandPaths(std::span<const UnitId> labels, std::size_t frames,
                                        std::size_t units) {
  if (frames > 10 || units > 6) throw Error("ExpandPaths: beyond oracle scale (T<=10, U<=6)");
  if (units < 1) throw Error("ExpandPaths: need at least the blank unit");
  const UnitId blank = static_cast<UnitId>(units) - 1;
  internal::CheckLabels(labels, static_cast<Eigen::Index>(units));
  std::vector<CtcPath> out;
  if (frames == 0) {
    if (labels.empty()) out.emplace_back();
    return out;
  }
  if (MinimumFrames(labels) > frames) return out;
  const auto ext = internal::Interleave(labels, blank);
  CtcPath prefix;
  // Paths start in the leading blank or in the first label.
  for (std::size_t s = 0; s < std::min<std::size_t>(2, ext.size()); ++s) {
    if ((ext.size() - 1 - s) / 2 > frames - 1) continue;
    internal::ExpandFrom(ext, s, 0, frames, prefix, out);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// -ln sum over ExpandPaths of prod_t P(pi_t | x_t). nullopt when no path
/// exists.
inline std::optional<double> CtcLossBruteForce(const PosteriorLattice& lattice,
                                               std::span<const UnitId> labels) {
  const auto paths = ExpandPaths(labels, static_cast<std::size_t>(lattice.frames()),
                                 static_cast<std::size_t>(lattice.units()));
  if (paths.empty()) return std::nullopt;
  std::vector<double> log_probs;
  log_probs.reserve(paths.size());
  for (const auto& path : paths) {
    double lp = 0.0;
    for (std::size_t t = 0; t < path.size(); ++t) {
      lp += SafeLog(lattice.probs(static_cast<Eigen::Index>(t), path[t]));
    }
    log_probs.push_back(lp);
  }
  return -LogSumExp(log_probs);
}

/// CTC loss by the log-domain forward-backward recursion, with the gradient
/// with respect to the logits that produced `lattice` through a softmax.
inline CtcLossResult CtcLoss(const PosteriorLattice& lattice, std::span<const UnitId> labels) {
  const Eigen::Index T = lattice.frames();
  const Eigen::Index U = lattice.units();
  if (T < 1 || U < 1) throw Error("CtcLoss: empty lattice");
  internal::CheckLabels(labels, U);
  CtcLossResult result;
  if (MinimumFrames(labels) > static_cast<std::size_t>(T)) {
    result.feasible = false;
    result.loss = std::numeric_limits<double>::infinity();
    return result;
  }
  const UnitId blank = lattice.blank_id();
  const auto ext = internal::Interleave(labels, blank);
  const Eigen::Index S = static_cast<Eigen::Index>(ext.size());

  Matrix log_y(T, U);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index u = 0; u < U; ++u) log_y(t, u) = SafeLog(lattice.probs(t, u));

  auto can_skip = [&](Eigen::Index s) {
    return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];
  };

  // alpha(t, s) includes the emission at t; beta(t, s) covers frames after t.
  Matrix alpha = Matrix::Constant(T, S, kLogZero);
  Matrix beta = Matrix::Constant(T, S, kLogZero);
  alpha(0, 0) = log_y(0, ext[0]);
  if (S > 1) alpha(0, 1) = log_y(0, ext[1]);
  for (Eigen::Index t = 1; t < T; ++t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = LogAdd(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = LogAdd(a, alpha(t - 1, s - 2));
      alpha(t, s) = IsLogZero(a) ? kLogZero : a + log_y(t, ext[s]);
    }
  }
  beta(T - 1, S - 1) = 0.0;
  if (S > 1) beta(T - 1, S - 2) = 0.0;
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    for (Eigen::Index s = 0; s < S; ++s) {
      double b = beta(t + 1, s) + log_y(t + 1, ext[s]);
      if (s + 1 < S) b = LogAdd(b, beta(t + 1, s + 1) + log_y(t + 1, ext[s + 1]));
      if (s + 2 < S && can_skip(s + 2)) {
        b = LogAdd(b, beta(t + 1, s + 2) + log_y(t + 1, ext[s + 2]));
      }
      beta(t, s) = IsLogZero(b) ? kLogZero : b;
    }
  }
  double log_p = alpha(T - 1, S - 1);
  if (S > 1) log_p = LogAdd(log_p, alpha(T - 1, S - 2));
  if (IsLogZero(log_p)) {
    result.feasible = false;
    result.loss = std::numeric_limits<double>::infinity();
    return result;
  }
  result.loss = std::max(0.0, -log_p);

  // d loss / d logit(t, k) = y(t, k) - sum_{s: ext[s] = k} gamma(t, s).
  result.grad_logits = lattice.probs;
  std::vector<double> occupancy(static_cast<std::size_t>(U));
  for (Eigen::Index t = 0; t < T; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kLogZero);
    for (Eigen::Index s = 0; s < S; ++s) {
      double g = alpha(t, s) + beta(t, s);
      if (IsLogZero(alpha(t, s)) || IsLogZero(beta(t, s))) continue;
      occupancy[ext[s]] = LogAdd(occupancy[ext[s]], g);
    }
    for (Eigen::Index u = 0; u < U; ++u) {
      if (!IsLogZero(occupancy[u])) result.grad_logits(t, u) -= std::exp(occupancy[u] - log_p);
    }
  }
  return result;
}

inline CtcLossResult CtcLoss(const PosteriorLattice& lattice, const LabelSequence& labels) {
  return CtcLoss(lattice, std::span<const UnitId>(labels.ids));
}

/// Frame-wise argmax, lowest index winning ties.
inline CtcPath BestPath(const PosteriorLattice& lattice) {
  CtcPath path(static_cast<std::size_t>(lattice.frames()));
  for (Eigen::Index t = 0; t < lattice.frames(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index u = 1; u < lattice.units(); ++u) {
      if (lattice.probs(t, u) > lattice.probs(t, best)) best = u;
    }
    path[static_cast<std::size_t>(t)] = static_cast<UnitId>(best);
  }
  return path;
}

inline std::vector<UnitId> GreedyDecode(const PosteriorLattice& lattice) {
  return Collapse(BestPath(lattice), lattice.blank_id());
}

inline WordSeq DecodeToWords(const PosteriorLattice& lattice, const Vocabulary& vocab) {
  if (static_cast<std::size_t>(lattice.units()) != vocab.size()) {
    throw Error("DecodeToWords: lattice width does not match vocabulary");
  }
  return CollapseToWords(GreedyDecode(lattice), vocab);
}

}  // namespace ctcadapt
