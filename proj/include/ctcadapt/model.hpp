// ctcadapt/model.hpp

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
#include "ctcadapt/ctc.hpp"
#include "ctcadapt/numerics.hpp"
#include "ctcadapt/random.hpp"
#include "ctcadapt/targets.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ctcadapt {

enum class UpdateScope { kAll, kHidden, kTop };

inline std::string_view ToString(UpdateScope s) {
  switch (s) {
    case UpdateScope::kAll: return "All";
    case UpdateScope::kHidden: return "Hidden";
    case UpdateScope::kTop: return "Top";
  }
  return "?";
}

inline UpdateScope ParseUpdateScope(std::string_view s) {
  if (s == "All" || s == "all") return UpdateScope::kAll;
  if (s == "Hidden" || s == "hidden") return UpdateScope::kHidden;
  if (s == "Top" || s == "top") return UpdateScope::kTop;
  throw Error("unknown update scope: " + std::string(s));
}

enum class GroupRole { kEncoder, kHead, kAdapter };

/// One softmax output layer and the inventory it predicts.
struct HeadSpec {
  std::string name;
  Vocabulary vocab;
};

struct ModelConfig {
  int feature_dim = 16;
  /// Memory cells per direction, one entry per bi-directional layer.
  std::vector<int> hidden = {32, 32};
  std::vector<HeadSpec> heads;
};

/// Which parameter groups an update may touch, indexed like the layout.
struct GroupMask {
  std::vector<bool> trainable;

  bool operator[](std::size_t i) const { return trainable[i]; }
  bool any() const {
    for (bool b : trainable)
      if (b) return true;
    return false;
  }
};

/// Intermediate values of one LSTM direction, indexed by true time.
struct DirectionTrace {
  Matrix gates;   // 4H x T, post-activation i, f, g, o
  Matrix cell;    // H x T
  Matrix tanh_cell;
  Matrix hidden;  // H x T
};

struct LayerTrace {
  Matrix input;  // in x T
  DirectionTrace fw, bw;
  Matrix raw;         // [h_fw; h_bw], 2H x T
  Matrix after_scale;  // raw after the scalar adapter (or raw)
};

struct EncoderTrace {
  std::vector<LayerTrace> layers;
};

/// A bi-directional LSTM encoder shared by one or more CTC softmax heads.
/// All parameters live in one ParamVector with groups
///   enc<k>.fw, enc<k>.bw   [W (4H x in) | R (4H x H) | b (4H)]
///   head.<name>            [W (U x E) | b (U)]
///   adapt.scalar<k>        [scale (2H) | offset (2H)]
///   adapt.linear           [M (w x w) | c (w)]
class CtcModel {
 public:
  CtcModel() = default;

  static CtcModel Init(const ModelConfig& config, std::uint64_t seed) {
    if (config.feature_dim <= 0) throw Error("model: feature_dim must be positive");
    if (config.hidden.empty()) throw Error("model: need at least one encoder layer");
    for (int h : config.hidden)
      if (h <= 0) throw Error("model: hidden widths must be positive");
    if (config.heads.empty()) throw Error("model: need at least one head");
    CtcModel m;
    m.feature_dim_ = config.feature_dim;
    m.hidden_ = config.hidden;
    m.seed_ = seed;
    for (std::size_t k = 0; k < m.hidden_.size(); ++k) {
      const int in = m.LayerInputWidth(k), h = m.hidden_[k];
      for (const char* dir : {"fw", "bw"}) {
        std::string name = "enc" + std::to_string(k) + "." + dir;
        m.params_.AddGroup(name, static_cast<std::size_t>(4 * h * (in + h + 1)));
        m.InitLstmGroup(name, in, h);
      }
    }
    for (const auto& spec : config.heads) m.AddHead(spec);
    return m;
  }

  int feature_dim() const { return feature_dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  std::size_t num_layers() const { return hidden_.size(); }
  int output_width() const { return 2 * hidden_.back(); }
  std::uint64_t seed() const { return seed_; }

  const std::vector<HeadSpec>& heads() const { return heads_; }
  /// The first head is the model's primary output.
  const HeadSpec& primary_head() const { return heads_.front(); }
  bool HasHead(std::string_view name) const {
    for (const auto& h : heads_)
      if (h.name == name) return true;
    return false;
  }
  const HeadSpec& head(std::string_view name) const {
    for (const auto& h : heads_)
      if (h.name == name) return h;
    throw Error("unknown head: " + std::string(name));
  }

  bool has_scalar_adapter() const { return scalar_adapter_; }
  bool has_linear_adapter() const { return linear_adapter_; }

  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

  static GroupRole RoleOf(const std::string& group) {
    if (group.rfind("head.", 0) == 0) return GroupRole::kHead;
    if (group.rfind("adapt.", 0) == 0) return GroupRole::kAdapter;
    return GroupRole::kEncoder;
  }

  /// All: every group. Hidden: encoder and adapters. Top: softmax heads.
  GroupMask SelectTrainable(UpdateScope scope) const {
    GroupMask mask;
    for (const auto& g : params_.layout()) {
      GroupRole r = RoleOf(g.name);
      bool on = scope == UpdateScope::kAll ||
                (scope == UpdateScope::kHidden && r != GroupRole::kHead) ||
                (scope == UpdateScope::kTop && r == GroupRole::kHead);
      mask.trainable.push_back(on);
    }
    return mask;
  }

  GroupMask MaskForRole(GroupRole role) const {
    GroupMask mask;
    for (const auto& g : params_.layout()) mask.trainable.push_back(RoleOf(g.name) == role);
    return mask;
  }

  GroupMask MaskForGroup(const std::string& name) const {
    GroupMask mask;
    for (const auto& g : params_.layout()) mask.trainable.push_back(g.name == name);
    return mask;
  }

  /// Parameter count of a scalar adapter over layers with `hidden` cells per
  /// direction: a scale and an offset per output element.
  static std::size_t ScalarAdapterSize(const std::vector<int>& hidden) {
    std::size_t n = 0;
    for (int h : hidden) n += 2 * static_cast<std::size_t>(2 * h);
    return n;
  }
  static std::size_t LinearAdapterSize(std::size_t width) { return width * width + width; }

  std::size_t AdapterParamCount() const {
    std::size_t n = 0;
    for (const auto& g : params_.layout()) {
      if (RoleOf(g.name) == GroupRole::kAdapter) n += g.length;
    }
    return n;
  }

  /// Element-wise scale (1) and offset (0) on every encoder layer's output.
  void AttachScalarAdapter() {
    if (scalar_adapter_) throw Error("scalar adapter already attached");
    for (std::size_t k = 0; k < hidden_.size(); ++k) {
      const std::size_t w = static_cast<std::size_t>(2 * hidden_[k]);
      params_.AddGroup("adapt.scalar" + std::to_string(k), 2 * w);
      auto slice = params_.Slice("adapt.scalar" + std::to_string(k));
      slice.head(static_cast<Eigen::Index>(w)).setOnes();
    }
    scalar_adapter_ = true;
  }

  /// Square identity-initialized layer between the last two encoder layers.
  void InsertLinearAdapter() {
    if (hidden_.size() < 2) throw Error("linear adapter needs at least two encoder layers");
    if (linear_adapter_) throw Error("linear adapter already attached");
    const Eigen::Index w = LinearAdapterWidth();
    params_.AddGroup("adapt.linear", LinearAdapterSize(static_cast<std::size_t>(w)));
    auto slice = params_.Slice("adapt.linear");
    Eigen::Map<Matrix>(slice.data(), w, w).setIdentity();
    linear_adapter_ = true;
  }

  /// Adds a randomly initialized letter softmax on top of the encoder.
  void AttachLetterHead(const Vocabulary& letters, std::string name = "letter") {
    if (letters.kind() != VocabKind::kLetter) throw Error("letter head needs a letter vocabulary");
    if (HasHead(name)) throw Error("duplicate head: " + name);
    AddHead(HeadSpec{std::move(name), letters});
  }

  /// Deep copy for use as a read-only reference.
  std::shared_ptr<const CtcModel> CloneFrozen() const {
    return std::make_shared<const CtcModel>(*this);
  }

  // ---------------------------------------------------------------- forward

  /// Runs the encoder on T x d features. Returns the E x T output (frames as
  /// columns). `trace` may be null when no backward pass follows.
  Matrix Encode(const Matrix& features, EncoderTrace* trace) const {
    if (features.cols() != feature_dim_) {
      throw Error("model: feature dim " + std::to_string(features.cols()) + " != " +
                  std::to_string(feature_dim_));
    }
    if (features.rows() < 1) throw Error("model: empty utterance");
    Matrix x = features.transpose();
    if (trace) trace->layers.assign(hidden_.size(), LayerTrace{});
    for (std::size_t k = 0; k < hidden_.size(); ++k) {
      LayerTrace local;
      LayerTrace& lt = trace ? trace->layers[k] : local;
      lt.input = std::move(x);
      const int h = hidden_[k];
      RunDirection(k, "fw", lt.input, false, lt.fw);
      RunDirection(k, "bw", lt.input, true, lt.bw);
      const Eigen::Index T = lt.input.cols();
      lt.raw.resize(2 * h, T);
      lt.raw.topRows(h) = lt.fw.hidden;
      lt.raw.bottomRows(h) = lt.bw.hidden;
      if (scalar_adapter_) {
        auto [scale, offset] = ScalarAdapter(k);
        lt.after_scale = (lt.raw.array().colwise() * scale.array()).colwise() + offset.array();
      } else {
        lt.after_scale = lt.raw;
      }
      if (linear_adapter_ && k + 2 == hidden_.size()) {
        auto [mat, bias] = LinearAdapter();
        x.noalias() = mat * lt.after_scale;
        x.colwise() += bias;
      } else {
        x = lt.after_scale;
      }
      if (!trace) {
        // Drop intermediates we will not need.
        local = LayerTrace{};
      }
    }
    return x;
  }

  /// U x T logits of the named head.
  Matrix HeadLogits(std::string_view name, const Matrix& encoded) const {
    auto [w, b] = HeadParams(name);
    Matrix z = w * encoded;
    z.colwise() += b;
    return z;
  }

  static PosteriorLattice LatticeFromLogits(const Matrix& logits, std::string head) {
    return PosteriorLattice{SoftmaxColumns(logits).transpose(), std::move(head)};
  }

  PosteriorLattice Forward(const Matrix& features, std::string_view head_name) const {
    head(head_name);
    Matrix enc = Encode(features, nullptr);
    return LatticeFromLogits(HeadLogits(head_name, enc), std::string(head_name));
  }

  // --------------------------------------------------------------- backward

  /// Accumulates the head's parameter gradient into `grad` and d loss / d
  /// encoder output into `d_encoded`. `d_logits` is U x T.
  void HeadBackward(std::string_view name, const Matrix& encoded, const Matrix& d_logits,
                    Vector* grad, Matrix* d_encoded) const {
    const auto& g = params_.Group("head." + std::string(name));
    auto [w, b] = HeadParams(name);
    if (grad) {
      Eigen::Map<Matrix> dw(grad->data() + g.offset, w.rows(), w.cols());
      dw.noalias() += d_logits * encoded.transpose();
      Eigen::Map<Vector>(grad->data() + g.offset + w.size(), b.size()) += d_logits.rowwise().sum();
    }
    if (d_encoded) {
      if (d_encoded->size() == 0) *d_encoded = Matrix::Zero(encoded.rows(), encoded.cols());
      d_encoded->noalias() += w.transpose() * d_logits;
    }
  }

  /// Back-propagates d loss / d encoder output through adapters and LSTMs.
  void EncoderBackward(const EncoderTrace& trace, const Matrix& d_encoded, Vector* grad) const {
    Matrix d_out = d_encoded;
    for (std::size_t kk = hidden_.size(); kk-- > 0;) {
      const LayerTrace& lt = trace.layers[kk];
      const int h = hidden_[kk];
      Matrix d_scaled;
      if (linear_adapter_ && kk + 2 == hidden_.size()) {
        auto [mat, bias] = LinearAdapter();
        const auto& g = params_.Group("adapt.linear");
        Eigen::Map<Matrix> dm(grad->data() + g.offset, mat.rows(), mat.cols());
        dm.noalias() += d_out * lt.after_scale.transpose();
        Eigen::Map<Vector>(grad->data() + g.offset + mat.size(), bias.size()) +=
            d_out.rowwise().sum();
        d_scaled.noalias() = mat.transpose() * d_out;
      } else {
        d_scaled = std::move(d_out);
      }
      Matrix d_raw;
      if (scalar_adapter_) {
        auto [scale, offset] = ScalarAdapter(kk);
        const auto& g = params_.Group("adapt.scalar" + std::to_string(kk));
        Eigen::Map<Vector> ds(grad->data() + g.offset, scale.size());
        Eigen::Map<Vector> doff(grad->data() + g.offset + scale.size(), offset.size());
        ds += (d_scaled.array() * lt.raw.array()).rowwise().sum().matrix();
        doff += d_scaled.rowwise().sum();
        d_raw = d_scaled.array().colwise() * scale.array();
      } else {
        d_raw = std::move(d_scaled);
      }
      const bool need_input_grad = kk > 0;
      Matrix d_in;
      DirectionBackward(kk, "fw", lt.input, lt.fw, d_raw.topRows(h), false, grad,
                        need_input_grad ? &d_in : nullptr);
      DirectionBackward(kk, "bw", lt.input, lt.bw, d_raw.bottomRows(h), true, grad,
                        need_input_grad ? &d_in : nullptr);
      d_out = std::move(d_in);
    }
  }

  // ------------------------------------------------------------ persistence

  void Save(std::ostream& os) const;
  static CtcModel Load(std::istream& is);
  void Save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path);
    Save(os);
  }
  static CtcModel Load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot read " + path);
    return Load(is);
  }

  std::uint64_t Checksum() const { return ctcadapt::Checksum(params_.values()); }
  std::uint64_t GroupChecksum(const std::string& name) const {
    return ctcadapt::Checksum(params_.Slice(name));
  }
  /// Checksum over all groups with the given role.
  std::uint64_t RoleChecksum(GroupRole role) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& g : params_.layout()) {
      if (RoleOf(g.name) != role) continue;
      auto s = params_.Slice(g);
      h = ctcadapt::Checksum(std::span<const double>(s.data(), g.length), h);
    }
    return h;
  }

  bool operator==(const CtcModel& o) const {
    if (feature_dim_ != o.feature_dim_ || hidden_ != o.hidden_ || seed_ != o.seed_ ||
        scalar_adapter_ != o.scalar_adapter_ || linear_adapter_ != o.linear_adapter_ ||
        heads_.size() != o.heads_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < heads_.size(); ++i) {
      if (heads_[i].name != o.heads_[i].name || !(heads_[i].vocab == o.heads_[i].vocab)) return false;
    }
    return params_ == o.params_;
  }

 private:
  int LayerInputWidth(std::size_t k) const {
    return k == 0 ? feature_dim_ : 2 * hidden_[k - 1];
  }
  Eigen::Index LinearAdapterWidth() const { return 2 * hidden_[hidden_.size() - 2]; }

  void InitLstmGroup(const std::string& name, int in, int h) {
    Rng rng(DeriveSeed(seed_, name));
    auto s = params_.Slice(name);
    const double r = 1.0 / std::sqrt(static_cast<double>(in + h));
    const Eigen::Index nw = 4 * h * (in + h);
    for (Eigen::Index i = 0; i < nw; ++i) s[i] = rng.Uniform(-r, r);
    // Gate order i, f, g, o; forget-gate bias starts at 1.
    s.segment(nw + h, h).setOnes();
  }

  void AddHead(const HeadSpec& spec) {
    if (spec.vocab.size() < 2) throw Error("head vocabulary too small: " + spec.name);
    if (HasHead(spec.name)) throw Error("duplicate head: " + spec.name);
    const std::string group = "head." + spec.name;
    const int e = output_width();
    const int u = static_cast<int>(spec.vocab.size());
    params_.AddGroup(group, static_cast<std::size_t>(u * e + u));
    Rng rng(DeriveSeed(seed_, group));
    auto s = params_.Slice(group);
    const double r = 1.0 / std::sqrt(static_cast<double>(e));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(u) * e; ++i) s[i] = rng.Uniform(-r, r);
    heads_.push_back(spec);
  }

  struct LstmView {
    Eigen::Map<const Matrix> w, r;
    Eigen::Map<const Vector> b;
  };
  LstmView Lstm(std::size_t k, const char* dir) const {
    const int in = LayerInputWidth(k), h = hidden_[k];
    const auto& g = params_.Group("enc" + std::to_string(k) + "." + dir);
    const double* p = params_.values().data() + g.offset;
    return {Eigen::Map<const Matrix>(p, 4 * h, in),
            Eigen::Map<const Matrix>(p + 4 * h * in, 4 * h, h),
            Eigen::Map<const Vector>(p + 4 * h * (in + h), 4 * h)};
  }

  std::pair<Eigen::Map<const Matrix>, Eigen::Map<const Vector>> HeadParams(std::string_view name) const {
    const auto& g = params_.Group("head." + std::string(name));
    const Eigen::Index e = output_width();
    const Eigen::Index u = static_cast<Eigen::Index>(g.length) / (e + 1);
    const double* p = params_.values().data() + g.offset;
    return {Eigen::Map<const Matrix>(p, u, e), Eigen::Map<const Vector>(p + u * e, u)};
  }

  std::pair<Eigen::Map<const Vector>, Eigen::Map<const Vector>> ScalarAdapter(std::size_t k) const {
    const auto& g = params_.Group("adapt.scalar" + std::to_string(k));
    const Eigen::Index w = 2 * hidden_[k];
    const double* p = params_.values().data() + g.offset;
    return {Eigen::Map<const Vector>(p, w), Eigen::Map<const Vector>(p + w, w)};
  }

  std::pair<Eigen::Map<const Matrix>, Eigen::Map<const Vector>> LinearAdapter() const {
    const auto& g = params_.Group("adapt.linear");
    const Eigen::Index w = LinearAdapterWidth();
    const double* p = params_.values().data() + g.offset;
    return {Eigen::Map<const Matrix>(p, w, w), Eigen::Map<const Vector>(p + w * w, w)};
  }

  static double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  void RunDirection(std::size_t k, const char* dir, const Matrix& input, bool reverse,
                    DirectionTrace& out) const {
    const int h = hidden_[k];
    const Eigen::Index T = input.cols();
    auto p = Lstm(k, dir);
    out.gates.noalias() = p.w * input;
    out.gates.colwise() += p.b;
    out.cell.resize(h, T);
    out.tanh_cell.resize(h, T);
    out.hidden.resize(h, T);
    Vector a(4 * h);
    for (Eigen::Index step = 0; step < T; ++step) {
      const Eigen::Index t = reverse ? T - 1 - step : step;
      const Eigen::Index prev = reverse ? t + 1 : t - 1;
      a = out.gates.col(t);
      if (step > 0) a.noalias() += p.r * out.hidden.col(prev);
      for (int j = 0; j < h; ++j) {
        a[j] = Sigmoid(a[j]);
        a[h + j] = Sigmoid(a[h + j]);
        a[2 * h + j] = std::tanh(a[2 * h + j]);
        a[3 * h + j] = Sigmoid(a[3 * h + j]);
      }
      out.gates.col(t) = a;
      for (int j = 0; j < h; ++j) {
        double c = a[j] * a[2 * h + j];
        if (step > 0) c += a[h + j] * out.cell(j, prev);
        out.cell(j, t) = c;
        const double tc = std::tanh(c);
        out.tanh_cell(j, t) = tc;
        out.hidden(j, t) = a[3 * h + j] * tc;
      }
    }
  }

  template <typename DerivedD>
  void DirectionBackward(std::size_t k, const char* dir, const Matrix& input,
                         const DirectionTrace& tr, const Eigen::MatrixBase<DerivedD>& d_hidden,
                         bool reverse, Vector* grad, Matrix* d_input) const {
    const int h = hidden_[k];
    const int in = LayerInputWidth(k);
    const Eigen::Index T = input.cols();
    auto p = Lstm(k, dir);
    Matrix d_pre(4 * h, T);
    Matrix h_prev = Matrix::Zero(h, T);
    Vector dh_rec = Vector::Zero(h), dc_rec = Vector::Zero(h), da(4 * h);
    for (Eigen::Index step = T - 1; step >= 0; --step) {
      const Eigen::Index t = reverse ? T - 1 - step : step;
      const Eigen::Index prev = reverse ? t + 1 : t - 1;
      const bool first = step == 0;
      if (!first) h_prev.col(t) = tr.hidden.col(prev);
      for (int j = 0; j < h; ++j) {
        const double gi = tr.gates(j, t), gf = tr.gates(h + j, t);
        const double gg = tr.gates(2 * h + j, t), go = tr.gates(3 * h + j, t);
        const double tc = tr.tanh_cell(j, t);
        const double dh = d_hidden(j, t) + dh_rec[j];
        const double dc = dh * go * (1.0 - tc * tc) + dc_rec[j];
        const double c_prev = first ? 0.0 : tr.cell(j, prev);
        da[j] = dc * gg * gi * (1.0 - gi);
        da[h + j] = dc * c_prev * gf * (1.0 - gf);
        da[2 * h + j] = dc * gi * (1.0 - gg * gg);
        da[3 * h + j] = dh * tc * go * (1.0 - go);
        dc_rec[j] = dc * gf;
      }
      d_pre.col(t) = da;
      dh_rec.noalias() = p.r.transpose() * da;
    }
    if (grad) {
      const auto& g = params_.Group("enc" + std::to_string(k) + "." + dir);
      double* base = grad->data() + g.offset;
      Eigen::Map<Matrix>(base, 4 * h, in).noalias() += d_pre * input.transpose();
      Eigen::Map<Matrix>(base + 4 * h * in, 4 * h, h).noalias() += d_pre * h_prev.transpose();
      Eigen::Map<Vector>(base + 4 * h * (in + h), 4 * h) += d_pre.rowwise().sum();
    }
    if (d_input) {
      if (d_input->size() == 0) *d_input = Matrix::Zero(in, T);
      d_input->noalias() += p.w.transpose() * d_pre;
    }
  }

  int feature_dim_ = 0;
  std::vector<int> hidden_;
  std::vector<HeadSpec> heads_;
  bool scalar_adapter_ = false;
  bool linear_adapter_ = false;
  std::uint64_t seed_ = 0;
  ParamVector params_;
};

using FrozenModel = std::shared_ptr<const CtcModel>;

// --------------------------------------------------------------------------
// Checkpoint container. Everything is little-endian:
//   "CTCACKPT" u32 version
//   u32 feature_dim, u32 layers, u32 hidden[layers], u8 scalar, u8 linear,
//   u64 seed
//   u32 heads, per head: str name, str kind, u32 num_words, u32 units, str unit[]
//   u32 groups, per group: str name, u64 length
//   f64 values in layout order
// where str is u32 length + bytes.

namespace io {
inline constexpr char kCheckpointMagic[8] = {'C', 'T', 'C', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace io


inline void CtcModel::Save(std::ostream& os) const {
  os.write(io::kCheckpointMagic, 8);
  io::PutU32(os, io::kCheckpointVersion);
  io::PutU32(os, static_cast<std::uint32_t>(feature_dim_));
  io::PutU32(os, static_cast<std::uint32_t>(hidden_.size()));
  for (int h : hidden_) io::PutU32(os, static_cast<std::uint32_t>(h));
  io::PutU8(os, scalar_adapter_);
  io::PutU8(os, linear_adapter_);
  io::PutU64(os, seed_);
  io::PutU32(os, static_cast<std::uint32_t>(heads_.size()));
  for (const auto& h : heads_) {
    io::PutStr(os, h.name);
    io::PutStr(os, ToString(h.vocab.kind()));
    io::PutU32(os, static_cast<std::uint32_t>(h.vocab.num_words()));
    io::PutU32(os, static_cast<std::uint32_t>(h.vocab.size()));
    for (const auto& u : h.vocab.units()) io::PutStr(os, u);
  }
  io::PutU32(os, static_cast<std::uint32_t>(params_.layout().size()));
  for (const auto& g : params_.layout()) {
    io::PutStr(os, g.name);
    io::PutU64(os, g.length);
  }
  for (Eigen::Index i = 0; i < params_.values().size(); ++i) io::PutF64(os, params_.values()[i]);
  if (!os) throw Error("checkpoint: write failed");
}

inline CtcModel CtcModel::Load(std::istream& is) {
  char magic[8];
  io::ReadExact(is, magic, 8);
  if (std::memcmp(magic, io::kCheckpointMagic, 8) != 0) throw Error("checkpoint: bad magic");
  if (io::GetU32(is) != io::kCheckpointVersion) throw Error("checkpoint: unsupported version");
  ModelConfig config;
  config.feature_dim = static_cast<int>(io::GetU32(is));
  const std::uint32_t layers = io::GetU32(is);
  if (layers == 0 || layers > 64) throw Error("checkpoint: bad layer count");
  config.hidden.clear();
  for (std::uint32_t k = 0; k < layers; ++k) config.hidden.push_back(static_cast<int>(io::GetU32(is)));
  const bool scalar = io::GetU8(is) != 0;
  const bool linear = io::GetU8(is) != 0;
  const std::uint64_t seed = io::GetU64(is);
  const std::uint32_t nheads = io::GetU32(is);
  std::vector<HeadSpec> heads;
  for (std::uint32_t i = 0; i < nheads; ++i) {
    std::string name = io::GetStr(is);
    VocabKind kind = ParseVocabKind(io::GetStr(is));
    std::size_t num_words = io::GetU32(is);
    std::uint32_t n = io::GetU32(is);
    std::vector<std::string> units;
    units.reserve(n);
    for (std::uint32_t u = 0; u < n; ++u) units.push_back(io::GetStr(is));
    heads.push_back(HeadSpec{std::move(name), Vocabulary(kind, std::move(units), num_words)});
  }
  if (heads.empty()) throw Error("checkpoint: no heads");
  const std::uint32_t ngroups = io::GetU32(is);
  std::vector<std::pair<std::string, std::uint64_t>> stored;
  for (std::uint32_t i = 0; i < ngroups; ++i) {
    std::string name = io::GetStr(is);
    stored.emplace_back(std::move(name), io::GetU64(is));
  }
  // Replay the attach order recorded by the layout.
  config.heads = {heads.front()};
  CtcModel m = Init(config, seed);
  for (const auto& [name, len] : stored) {
    if (m.params_.FindGroup(name) >= 0) continue;
    if (name.rfind("head.", 0) == 0) {
      const std::string head_name = name.substr(5);
      auto it = std::find_if(heads.begin(), heads.end(),
                             [&](const HeadSpec& h) { return h.name == head_name; });
      if (it == heads.end()) throw Error("checkpoint: group for unknown head " + head_name);
      m.AddHead(*it);
    } else if (name.rfind("adapt.scalar", 0) == 0 && scalar) {
      m.AttachScalarAdapter();
    } else if (name == "adapt.linear" && linear) {
      m.InsertLinearAdapter();
    } else {
      throw Error("checkpoint: unexpected group " + name);
    }
  }
  if (m.heads_.size() != heads.size() || m.scalar_adapter_ != scalar ||
      m.linear_adapter_ != linear) {
    throw Error("checkpoint: header does not match layout");
  }
  if (m.params_.layout().size() != stored.size()) throw Error("checkpoint: layout mismatch");
  for (std::size_t i = 0; i < stored.size(); ++i) {
    const auto& g = m.params_.layout()[i];
    if (g.name != stored[i].first || g.length != stored[i].second) {
      throw Error("checkpoint: layout mismatch at group " + stored[i].first);
    }
  }
  for (Eigen::Index i = 0; i < m.params_.values().size(); ++i) m.params_.values()[i] = io::GetF64(is);
  return m;
}

}  // namespace ctcadapt
