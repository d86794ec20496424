// tests/ctc_test.cpp

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

#include "ctcadapt/ctc.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace ctcadapt {
namespace {

using testing::RandomLabels;
using testing::RandomLattice;

constexpr UnitId a = 0, b = 1;

PosteriorLattice Lattice(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index t = 0;
  for (const auto& r : rows) {
    Eigen::Index u = 0;
    for (double v : r) m(t, u++) = v;
    ++t;
  }
  return {m, "test"};
}

// All U^T sequences filtered by Collapse.
std::set<CtcPath> FilterAllSequences(const std::vector<UnitId>& labels, std::size_t T,
                                     std::size_t U) {
  std::set<CtcPath> out;
  CtcPath path(T, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < T; ++i) total *= U;
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t x = n;
    for (std::size_t i = 0; i < T; ++i) {
      path[T - 1 - i] = static_cast<UnitId>(x % U);
      x /= U;
    }
    if (Collapse(path, static_cast<UnitId>(U) - 1) == labels) out.insert(path);
  }
  return out;
}

TEST(Collapse, Examples) {
  const UnitId blank = 2;
  EXPECT_EQ(Collapse(std::vector<UnitId>{a, a, blank, a, b}, blank), (std::vector<UnitId>{a, a, b}));
  EXPECT_TRUE(Collapse(std::vector<UnitId>{blank, blank}, blank).empty());
  EXPECT_EQ(Collapse(std::vector<UnitId>{a, blank, a}, blank), (std::vector<UnitId>{a, a}));
}

TEST(ExpandPaths, Examples) {
  const UnitId blank = 1;
  auto one = ExpandPaths(std::vector<UnitId>{a}, 3, 2);
  std::set<CtcPath> expect = {{a, a, a}, {a, a, blank}, {a, blank, blank},
                              {blank, a, a}, {blank, a, blank}, {blank, blank, a}};
  EXPECT_EQ(std::set<CtcPath>(one.begin(), one.end()), expect);
  EXPECT_EQ(one.size(), 6u);

  auto twice = ExpandPaths(std::vector<UnitId>{a, a}, 3, 2);
  EXPECT_EQ(twice, (std::vector<CtcPath>{{a, blank, a}}));

  auto ab = ExpandPaths(std::vector<UnitId>{a, b}, 2, 3);
  EXPECT_EQ(ab, (std::vector<CtcPath>{{a, b}}));
}

TEST(ExpandPaths, InfeasibleIsEmptyAndGuardsScale) {
  EXPECT_TRUE(ExpandPaths(std::vector<UnitId>{a, a}, 2, 2).empty());
  EXPECT_THROW(ExpandPaths(std::vector<UnitId>{a}, 11, 2), Error);
  EXPECT_THROW(ExpandPaths(std::vector<UnitId>{a}, 3, 7), Error);
  EXPECT_THROW(ExpandPaths(std::vector<UnitId>{1}, 3, 2), Error);  // blank in labels
}

TEST(ExpandPaths, MatchesFilterOfAllSequences) {
  for (std::size_t U = 2; U <= 4; ++U) {
    for (std::size_t T = 1; T <= 5; ++T) {
      // Every label sequence of length <= 3 over the U-1 non-blank units.
      std::vector<std::vector<UnitId>> all = {{}};
      for (std::size_t len = 1; len <= 3; ++len) {
        std::vector<std::vector<UnitId>> next;
        for (const auto& p : all) {
          if (p.size() != len - 1) continue;
          for (UnitId u = 0; u < static_cast<UnitId>(U) - 1; ++u) {
            auto q = p;
            q.push_back(u);
            next.push_back(q);
          }
        }
        all.insert(all.end(), next.begin(), next.end());
      }
      for (const auto& labels : all) {
        auto got = ExpandPaths(labels, T, U);
        EXPECT_EQ(std::set<CtcPath>(got.begin(), got.end()), FilterAllSequences(labels, T, U));
        EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
      }
    }
  }
}

TEST(CtcLossBruteForce, Examples) {
  // Units {u, blank}.
  EXPECT_NEAR(*CtcLossBruteForce(Lattice({{1.0, 0.0}}), std::vector<UnitId>{0}), 0.0, 1e-15);
  EXPECT_NEAR(*CtcLossBruteForce(Lattice({{0.5, 0.5}}), std::vector<UnitId>{0}), std::log(2.0),
              1e-12);
  EXPECT_NEAR(*CtcLossBruteForce(Lattice({{0.5, 0.5}, {0.5, 0.5}}), std::vector<UnitId>{0}),
              -std::log(0.75), 1e-12);
  EXPECT_NEAR(-std::log(0.75), 0.287682, 1e-6);
  EXPECT_FALSE(CtcLossBruteForce(Lattice({{0.5, 0.5}}), std::vector<UnitId>{0, 0}).has_value());
}

TEST(CtcLoss, Examples) {
  auto half = CtcLoss(Lattice({{0.5, 0.5}}), std::vector<UnitId>{0});
  EXPECT_TRUE(half.feasible);
  EXPECT_NEAR(half.loss, std::log(2.0), 1e-12);
  EXPECT_NEAR(CtcLoss(Lattice({{0.5, 0.5}, {0.5, 0.5}}), std::vector<UnitId>{0}).loss,
              -std::log(0.75), 1e-12);
  EXPECT_EQ(CtcLoss(Lattice({{1.0, 0.0}}), std::vector<UnitId>{0}).loss, 0.0);
  // Empty target: only the all-blank path.
  EXPECT_NEAR(CtcLoss(Lattice({{0.2, 0.8}, {0.4, 0.6}}), std::vector<UnitId>{}).loss,
              -std::log(0.8 * 0.6), 1e-12);
}

TEST(CtcLoss, MinimumFeasibleFrames) {
  Rng rng(5);
  for (int trial = 0; trial < 400; ++trial) {
    auto labels = RandomLabels(rng, 5, 3);
    const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.Index(7));
    auto res = CtcLoss(RandomLattice(rng, T, 3), labels);
    const bool expect = static_cast<std::size_t>(T) >= MinimumFrames(labels);
    EXPECT_EQ(res.feasible, expect);
    if (!expect) EXPECT_TRUE(std::isinf(res.loss));
  }
  EXPECT_EQ(MinimumFrames(std::vector<UnitId>{a, a, b, b, b}), 8u);
}

TEST(CtcLoss, MatchesBruteForce) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index U = 2 + static_cast<Eigen::Index>(rng.Index(4));
    const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.Index(7));
    auto lattice = RandomLattice(rng, T, U);
    auto labels = RandomLabels(rng, 4, U);
    auto fast = CtcLoss(lattice, labels);
    auto slow = CtcLossBruteForce(lattice, labels);
    ASSERT_EQ(fast.feasible, slow.has_value());
    if (slow) EXPECT_NEAR(fast.loss, *slow, 1e-10);
  }
}

TEST(CtcLoss, GradientRowsSumToZeroAndMatchFiniteDifferences) {
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index U = 2 + static_cast<Eigen::Index>(rng.Index(4));
    const Eigen::Index T = 1 + static_cast<Eigen::Index>(rng.Index(7));
    Matrix logits(U, T);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.Normal();
    auto labels = RandomLabels(rng, 3, U);
    auto res = CtcLoss(CtcModel::LatticeFromLogits(logits, "t"), labels);
    if (!res.feasible) continue;
    for (Eigen::Index t = 0; t < T; ++t) EXPECT_NEAR(res.grad_logits.row(t).sum(), 0.0, 1e-9);
    ParamVector p;
    p.AddGroup("logits", static_cast<std::size_t>(logits.size()));
    p.values() = Eigen::Map<Vector>(logits.data(), logits.size());
    auto loss = [&](const ParamVector& q) {
      Matrix z = Eigen::Map<const Matrix>(q.values().data(), U, T);
      return CtcLoss(CtcModel::LatticeFromLogits(z, "t"), labels).loss;
    };
    Vector numeric = FiniteDiffGrad(loss, p, 1e-5);
    Matrix analytic_ut = res.grad_logits.transpose();
    Vector analytic = Eigen::Map<Vector>(analytic_ut.data(), analytic_ut.size());
    EXPECT_LT(MaxRelativeError(analytic, numeric), 1e-4);
  }
}

TEST(CtcLoss, ZeroOnlyForCertainPath) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto lat = RandomLattice(rng, 4, 3);
    auto res = CtcLoss(lat, std::vector<UnitId>{0, 1});
    EXPECT_GT(res.loss, 0.0);
  }
  EXPECT_EQ(CtcLoss(Lattice({{1, 0, 0}, {0, 0, 1}, {0, 1, 0}}), std::vector<UnitId>{0, 1}).loss, 0.0);
}

TEST(GreedyDecode, Examples) {
  // Units {a, b, blank}.
  auto lat = Lattice({{0.6, 0.2, 0.2}, {0.6, 0.2, 0.2}, {0.1, 0.1, 0.8}, {0.1, 0.7, 0.2}});
  EXPECT_EQ(GreedyDecode(lat), (std::vector<UnitId>{a, b}));
  EXPECT_TRUE(GreedyDecode(Lattice({{0.1, 0.1, 0.8}, {0.2, 0.2, 0.6}})).empty());
  EXPECT_EQ(GreedyDecode(Lattice({{0.8, 0.1, 0.1}, {0.1, 0.1, 0.8}, {0.8, 0.1, 0.1}})),
            (std::vector<UnitId>{a, a}));
  // Ties go to the lowest index.
  EXPECT_EQ(BestPath(Lattice({{0.4, 0.4, 0.2}})), (CtcPath{a}));
}

TEST(DecodeToWords, MixUnitTwoStageCollapse) {
  std::vector<std::string> units = {"the", "at"};
  for (char c : kLetterChars) units.emplace_back(1, c);
  units.emplace_back("$");
  units.emplace_back("<blk>");
  Vocabulary v(VocabKind::kMixUnit, units, 1);
  const Eigen::Index U = static_cast<Eigen::Index>(v.size());
  std::vector<UnitId> argmax = {*v.Find("the"), *v.Find("$"), *v.Find("c"), *v.Find("at"),
                                *v.Find("$"), v.blank_id()};
  Matrix probs = Matrix::Constant(static_cast<Eigen::Index>(argmax.size()), U, 0.1 / (U - 1));
  for (std::size_t t = 0; t < argmax.size(); ++t) probs(static_cast<Eigen::Index>(t), argmax[t]) = 0.9;
  EXPECT_EQ(DecodeToWords({probs, "mixunit"}, v), (WordSeq{"the", "cat"}));

  Matrix blanks = Matrix::Constant(3, U, 0.0);
  blanks.col(U - 1).setOnes();
  EXPECT_TRUE(DecodeToWords({blanks, "mixunit"}, v).empty());
  EXPECT_THROW(DecodeToWords({Matrix::Ones(2, 3), "x"}, v), Error);
}

}  // namespace
}  // namespace ctcadapt
