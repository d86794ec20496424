// ctcadapt/numerics.hpp

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

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ctcadapt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Finite stand-in for ln(0). Anything at or below it is treated as zero
/// probability, so recursions never produce NaN from (-inf) - (-inf).
inline constexpr double kLogZero = -1.0e30;

inline bool IsLogZero(double v) { return v <= kLogZero; }

/// ln(exp(a) + exp(b)).
inline double LogAdd(double a, double b) {
  if (a < b) std::swap(a, b);
  if (IsLogZero(b)) return IsLogZero(a) ? kLogZero : a;
  return a + std::log1p(std::exp(b - a));
}

/// Numerically stable ln(sum_i exp(v_i)).
inline double LogSumExp(std::span<const double> values) {
  if (values.empty()) throw Error("LogSumExp: empty input");
  double max = *std::max_element(values.begin(), values.end());
  if (IsLogZero(max)) return kLogZero;
  double sum = 0.0;
  for (double v : values) {
    if (!IsLogZero(v)) sum += std::exp(v - max);
  }
  return max + std::log(sum);
}

inline double LogSumExp(std::initializer_list<double> values) {
  return LogSumExp(std::span<const double>(values.begin(), values.size()));
}

/// Clamped natural log: ln(0) maps to kLogZero.
inline double SafeLog(double p) { return p > 0.0 ? std::log(p) : kLogZero; }

/// Softmax of one row of logits.
inline Vector SoftmaxRow(const Eigen::Ref<const Vector>& logits) {
  if (logits.size() == 0) throw Error("SoftmaxRow: empty input");
  if (!logits.allFinite()) throw Error("SoftmaxRow: non-finite logit");
  Vector out = (logits.array() - logits.maxCoeff()).exp().matrix();
  out /= out.sum();
  return out;
}

/// Column-wise softmax; each column of `logits` is one frame.
inline Matrix SoftmaxColumns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.cols(); ++t) {
    out.col(t) = SoftmaxRow(logits.col(t));
  }
  return out;
}

/// One named, contiguous slice of a ParamVector.
struct ParamGroup {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Flat parameter storage partitioned into named groups. Groups are laid out
/// back to back in creation order.
class ParamVector {
 public:
  ParamVector() = default;

  /// Appends a zero-filled group and returns its index.
  std::size_t AddGroup(const std::string& name, std::size_t length) {
    if (FindGroup(name) >= 0) throw Error("duplicate parameter group: " + name);
    ParamGroup g{name, static_cast<std::size_t>(values_.size()), length};
    Vector grown = Vector::Zero(values_.size() + static_cast<Eigen::Index>(length));
    grown.head(values_.size()) = values_;
    values_ = std::move(grown);
    layout_.push_back(std::move(g));
    return layout_.size() - 1;
  }

  /// Index of the named group, or -1.
  long FindGroup(const std::string& name) const {
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      if (layout_[i].name == name) return static_cast<long>(i);
    }
    return -1;
  }

  const ParamGroup& Group(const std::string& name) const {
    long i = FindGroup(name);
    if (i < 0) throw Error("unknown parameter group: " + name);
    return layout_[static_cast<std::size_t>(i)];
  }

  Eigen::Map<Vector> Slice(const ParamGroup& g) {
    return {values_.data() + g.offset, static_cast<Eigen::Index>(g.length)};
  }
  Eigen::Map<const Vector> Slice(const ParamGroup& g) const {
    return {values_.data() + g.offset, static_cast<Eigen::Index>(g.length)};
  }
  Eigen::Map<Vector> Slice(const std::string& name) { return Slice(Group(name)); }
  Eigen::Map<const Vector> Slice(const std::string& name) const {
    return Slice(Group(name));
  }

  const std::vector<ParamGroup>& layout() const { return layout_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  /// Checks that groups tile the value buffer exactly.
  bool LayoutIsConsistent() const {
    std::size_t expect = 0;
    for (const auto& g : layout_) {
      if (g.offset != expect) return false;
      expect += g.length;
    }
    return expect == size();
  }

  bool operator==(const ParamVector& other) const {
    if (layout_.size() != other.layout_.size() || size() != other.size()) return false;
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      const auto& a = layout_[i];
      const auto& b = other.layout_[i];
      if (a.name != b.name || a.offset != b.offset || a.length != b.length) return false;
    }
    return BitEqual(values_, other.values_);
  }

  static bool BitEqual(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) return false;
    return std::equal(a.data(), a.data() + a.size(), b.data(), [](double x, double y) {
      return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
    });
  }

 private:
  Vector values_;
  std::vector<ParamGroup> layout_;
};

/// FNV-1a over the raw bytes of a run of doubles.
inline std::uint64_t Checksum(std::span<const double> values,
                              std::uint64_t seed = 1469598103934665603ULL) {
  std::uint64_t h = seed;
  for (double v : values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

inline std::uint64_t Checksum(const Eigen::Ref<const Vector>& v) {
  return Checksum(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

/// Central-difference gradient of `loss` at `params`.
inline Vector FiniteDiffGrad(const std::function<double(const ParamVector&)>& loss,
                             const ParamVector& params, double epsilon) {
  if (!(epsilon > 0.0)) throw Error("FiniteDiffGrad: epsilon must be positive");
  ParamVector probe = params;
  Vector grad(params.values().size());
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    const double orig = probe.values()[i];
    probe.values()[i] = orig + epsilon;
    const double up = loss(probe);
    probe.values()[i] = orig - epsilon;
    const double down = loss(probe);
    probe.values()[i] = orig;
    grad[i] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

/// Largest per-coordinate relative error between two gradients. Coordinates
/// where both magnitudes are below `floor` are compared against `floor`.
inline double MaxRelativeError(const Vector& a, const Vector& b, double floor = 1e-4) {
  if (a.size() != b.size()) throw Error("MaxRelativeError: size mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace ctcadapt
