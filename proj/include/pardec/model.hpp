#pragma once

// Seeded toy decoder-only transformer, templated on the scalar type.
//
// Every activation row is computed independently of how many other rows the
// sequence holds (per-row vector-matrix products, explicit sequential loops
// for attention). A row therefore has the same bits whether it is produced
// by a short autoregressive forward or a long Jacobi forward, which is what
// makes token-for-token oracle comparison meaningful.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pardec/error.hpp"
#include "pardec/rng.hpp"
#include "pardec/types.hpp"

namespace pardec {

enum class WeightInit : std::uint8_t { Uniform = 0, Zero = 1 };

struct ModelSpec {
  std::size_t vocab_size = 512;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  std::size_t max_seq = 128;
  std::uint64_t seed = 1;
  WeightInit init = WeightInit::Uniform;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Smallest vocabulary able to hold the 256-token action block plus begin/end.
constexpr std::size_t kMinVocab = 256 + 2;
constexpr double kInitBound = 0.08;

inline void validate(const ModelSpec& spec) {
  if (spec.d_model == 0 || spec.n_heads == 0 || spec.n_layers == 0 || spec.d_ff == 0)
    throw ConfigError("model: d_model, n_heads, n_layers and d_ff must be positive");
  if (spec.d_model % spec.n_heads != 0)
    throw ConfigError("model: d_model (" + std::to_string(spec.d_model) +
                      ") must be divisible by n_heads (" + std::to_string(spec.n_heads) + ")");
  if (spec.vocab_size < kMinVocab)
    throw ConfigError("model: vocab_size (" + std::to_string(spec.vocab_size) + ") must be >= " +
                      std::to_string(kMinVocab) + " to host the action block and begin/end tokens");
  if (spec.max_seq < 2) throw ConfigError("model: max_seq must be >= 2");
  if (spec.vocab_size > static_cast<std::size_t>(std::numeric_limits<TokenId>::max()))
    throw ConfigError("model: vocab_size exceeds the token id range");
}

/// Causal: position i attends to positions <= i.
/// ResponseBidirectional: the decode window (last context position plus every
/// response position) attends to the whole sequence; earlier prompt
/// positions stay causal.
enum class MaskMode : std::uint8_t { Causal, ResponseBidirectional };

template <typename Scalar>
class BasicToyModel {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  struct Layer {
    Matrix attn_q, attn_k, attn_v, attn_o;  // d_model x d_model
    Matrix ffn_up;                          // d_model x d_ff
    Matrix ffn_down;                        // d_ff x d_model
  };

  explicit BasicToyModel(const ModelSpec& spec) : spec_(spec) {
    validate(spec_);
    const auto d = static_cast<Eigen::Index>(spec_.d_model);
    const auto f = static_cast<Eigen::Index>(spec_.d_ff);
    const auto v = static_cast<Eigen::Index>(spec_.vocab_size);
    tok_emb_ = Matrix::Zero(v, d);
    pos_emb_ = Matrix::Zero(static_cast<Eigen::Index>(spec_.max_seq), d);
    layers_.resize(spec_.n_layers);
    for (auto& layer : layers_) {
      layer.attn_q = Matrix::Zero(d, d);
      layer.attn_k = Matrix::Zero(d, d);
      layer.attn_v = Matrix::Zero(d, d);
      layer.attn_o = Matrix::Zero(d, d);
      layer.ffn_up = Matrix::Zero(d, f);
      layer.ffn_down = Matrix::Zero(f, d);
    }
    head_ = Matrix::Zero(d, v);
  }

  const ModelSpec& spec() const noexcept { return spec_; }

  /// Visits every tensor in file order: tok_emb, pos_emb, then per layer
  /// attn_q, attn_k, attn_v, attn_o, ffn_up, ffn_down, then head.
  /// `layer` is the layer index, or kGlobalLayer for non-layer tensors.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    visit(*this, fn);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    visit(*this, fn);
  }

  static constexpr std::uint64_t kGlobalLayer = 0xFFFFFFFFULL;

  const Matrix& tok_emb() const noexcept { return tok_emb_; }
  const Matrix& pos_emb() const noexcept { return pos_emb_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const Matrix& head() const noexcept { return head_; }

 private:
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn& fn) {
    fn(std::string_view{"tok_emb"}, kGlobalLayer, self.tok_emb_);
    fn(std::string_view{"pos_emb"}, kGlobalLayer, self.pos_emb_);
    for (std::size_t l = 0; l < self.layers_.size(); ++l) {
      auto& layer = self.layers_[l];
      fn(std::string_view{"attn_q"}, std::uint64_t{l}, layer.attn_q);
      fn(std::string_view{"attn_k"}, std::uint64_t{l}, layer.attn_k);
      fn(std::string_view{"attn_v"}, std::uint64_t{l}, layer.attn_v);
      fn(std::string_view{"attn_o"}, std::uint64_t{l}, layer.attn_o);
      fn(std::string_view{"ffn_up"}, std::uint64_t{l}, layer.ffn_up);
      fn(std::string_view{"ffn_down"}, std::uint64_t{l}, layer.ffn_down);
    }
    fn(std::string_view{"head"}, kGlobalLayer, self.head_);
  }

  ModelSpec spec_;
  Matrix tok_emb_;
  Matrix pos_emb_;
  std::vector<Layer> layers_;
  Matrix head_;
};

using ToyModel = BasicToyModel<float>;

/// Total number of scalar parameters for a spec.
inline std::size_t parameter_count(const ModelSpec& s) {
  const std::size_t d = s.d_model;
  return s.vocab_size * d + s.max_seq * d + s.n_layers * (4 * d * d + 2 * d * s.d_ff) + d * s.vocab_size;
}

/// Builds a model whose weights are a pure function of the spec. Element i
/// (row-major) of tensor `name` in layer `layer` is
///   -0.08 + 0.16 * unit(draw(stream_key(seed, layer, fnv1a(name)), i))
/// computed in double and rounded once to Scalar.
template <typename Scalar = float>
BasicToyModel<Scalar> build_model(const ModelSpec& spec) {
  BasicToyModel<Scalar> model(spec);
  if (spec.init == WeightInit::Zero) return model;
  model.for_each_tensor([&](std::string_view name, std::uint64_t layer, auto& tensor) {
    const std::uint64_t key = rng::stream_key(spec.seed, layer, rng::fnv1a(name));
    Scalar* data = tensor.data();
    const auto size = static_cast<std::uint64_t>(tensor.size());
    for (std::uint64_t i = 0; i < size; ++i) {
      const double u = rng::unit(rng::draw(key, i));
      data[i] = static_cast<Scalar>(-kInitBound + 2.0 * kInitBound * u);
    }
  });
  return model;
}

/// FNV-1a over the little-endian bytes of every tensor, in file order.
template <typename Scalar>
std::uint64_t weight_checksum(const BasicToyModel<Scalar>& model) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  model.for_each_tensor([&](std::string_view, std::uint64_t, const auto& tensor) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(tensor.data());
    const auto n = static_cast<std::size_t>(tensor.size()) * sizeof(Scalar);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ULL;
    }
  });
  return h;
}

namespace detail {

template <typename Matrix>
void rms_norm_row(const Matrix& in, Eigen::Index row, Matrix& out) {
  using Scalar = typename Matrix::Scalar;
  Scalar ss{0};
  for (Eigen::Index c = 0; c < in.cols(); ++c) ss += in(row, c) * in(row, c);
  const Scalar inv = Scalar{1} / std::sqrt(ss / static_cast<Scalar>(in.cols()) + Scalar{1e-5});
  out.row(row) = in.row(row) * inv;
}

/// out.row(t) = in.row(t) * w for every row, one vector-matrix product per row.
template <typename Matrix>
void rowwise_product(const Matrix& in, const Matrix& w, Matrix& out) {
  out.resize(in.rows(), w.cols());
  for (Eigen::Index t = 0; t < in.rows(); ++t) out.row(t).noalias() = in.row(t) * w;
}

}  // namespace detail

/// Final hidden states (after the last norm) for every position of `tokens`.
/// Positions >= window_start attend to the full sequence when `mode` is
/// ResponseBidirectional; all other positions are causal.
template <typename Scalar>
typename BasicToyModel<Scalar>::Matrix hidden_states(const BasicToyModel<Scalar>& model,
                                                     std::span<const TokenId> tokens, MaskMode mode,
                                                     std::size_t window_start) {
  using Matrix = typename BasicToyModel<Scalar>::Matrix;
  using RowVector = typename BasicToyModel<Scalar>::RowVector;
  const auto& spec = model.spec();
  const auto T = static_cast<Eigen::Index>(tokens.size());
  const auto d = static_cast<Eigen::Index>(spec.d_model);
  const auto heads = static_cast<Eigen::Index>(spec.n_heads);
  const Eigen::Index hd = d / heads;
  const Scalar scale = Scalar{1} / std::sqrt(static_cast<Scalar>(hd));

  Matrix x(T, d);
  for (Eigen::Index t = 0; t < T; ++t) {
    const TokenId tok = tokens[static_cast<std::size_t>(t)];
    if (tok < 0 || static_cast<std::size_t>(tok) >= spec.vocab_size)
      throw ConfigError("forward: token id " + std::to_string(tok) + " outside vocabulary");
    x.row(t) = model.tok_emb().row(tok) + model.pos_emb().row(t);
  }

  Matrix h(T, d), q, k, v, attn(T, d), proj, up, down;
  std::vector<Scalar> scores(static_cast<std::size_t>(T));
  RowVector acc(hd);
  for (const auto& layer : model.layers()) {
    for (Eigen::Index t = 0; t < T; ++t) detail::rms_norm_row(x, t, h);
    detail::rowwise_product(h, layer.attn_q, q);
    detail::rowwise_product(h, layer.attn_k, k);
    detail::rowwise_product(h, layer.attn_v, v);
    for (Eigen::Index t = 0; t < T; ++t) {
      const bool open = mode == MaskMode::ResponseBidirectional &&
                        static_cast<std::size_t>(t) >= window_start;
      const Eigen::Index keys = open ? T : t + 1;
      for (Eigen::Index hh = 0; hh < heads; ++hh) {
        const Eigen::Index c0 = hh * hd;
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        for (Eigen::Index j = 0; j < keys; ++j) {
          const Scalar s = q.row(t).segment(c0, hd).dot(k.row(j).segment(c0, hd)) * scale;
          scores[static_cast<std::size_t>(j)] = s;
          best = std::max(best, s);
        }
        Scalar total{0};
        for (Eigen::Index j = 0; j < keys; ++j) {
          auto& s = scores[static_cast<std::size_t>(j)];
          s = std::exp(s - best);
          total += s;
        }
        acc.setZero();
        for (Eigen::Index j = 0; j < keys; ++j)
          acc += (scores[static_cast<std::size_t>(j)] / total) * v.row(j).segment(c0, hd);
        attn.row(t).segment(c0, hd) = acc;
      }
    }
    detail::rowwise_product(attn, layer.attn_o, proj);
    x += proj;

    for (Eigen::Index t = 0; t < T; ++t) detail::rms_norm_row(x, t, h);
    detail::rowwise_product(h, layer.ffn_up, up);
    up = up.cwiseMax(Scalar{0});
    detail::rowwise_product(up, layer.ffn_down, down);
    x += down;
  }
  for (Eigen::Index t = 0; t < T; ++t) detail::rms_norm_row(x, t, h);
  return h;
}

/// One logit row per response slot. Slot i (0-based) is read at absolute
/// position prompt.size() + i - 1, so in Causal mode it depends on the
/// prompt and response slots < i only.
template <typename Scalar>
typename BasicToyModel<Scalar>::Matrix forward_logits(const BasicToyModel<Scalar>& model,
                                                      std::span<const TokenId> prompt,
                                                      std::span<const TokenId> response, MaskMode mode) {
  using Matrix = typename BasicToyModel<Scalar>::Matrix;
  if (prompt.empty()) throw ConfigError("forward: prompt must be nonempty");
  const std::size_t total = prompt.size() + response.size();
  if (total > model.spec().max_seq)
    throw CapacityError("forward: sequence length " + std::to_string(total) + " exceeds max_seq " +
                        std::to_string(model.spec().max_seq));
  TokenSequence seq(prompt.begin(), prompt.end());
  seq.insert(seq.end(), response.begin(), response.end());
  const std::size_t first = prompt.size() - 1;
  // The response's last input token is only read by bidirectional attention.
  const std::size_t used = mode == MaskMode::Causal && !response.empty() ? total - 1 : total;
  const Matrix hidden = hidden_states(model, std::span<const TokenId>(seq.data(), used), mode, first);

  const auto rows = static_cast<Eigen::Index>(response.size());
  Matrix logits(rows, static_cast<Eigen::Index>(model.spec().vocab_size));
  for (Eigen::Index i = 0; i < rows; ++i)
    logits.row(i).noalias() = hidden.row(static_cast<Eigen::Index>(first) + i) * model.head();
  return logits;
}

/// Next-token row after `context` (causal); the autoregressive step.
template <typename Scalar>
typename BasicToyModel<Scalar>::RowVector next_token_logits(const BasicToyModel<Scalar>& model,
                                                            std::span<const TokenId> context) {
  if (context.empty()) throw ConfigError("forward: context must be nonempty");
  if (context.size() > model.spec().max_seq)
    throw CapacityError("forward: sequence length " + std::to_string(context.size()) +
                        " exceeds max_seq " + std::to_string(model.spec().max_seq));
  const auto hidden = hidden_states(model, context, MaskMode::Causal, context.size());
  return hidden.row(hidden.rows() - 1) * model.head();
}

/// Index of the maximal score; ties go to the lowest id.
template <typename Derived>
TokenId greedy_argmax(const Eigen::DenseBase<Derived>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i)
    if (row(i) > row(best)) best = i;
  return static_cast<TokenId>(best);
}

}  // namespace pardec
