#pragma once

// Greedy autoregressive decoding and Jacobi fixed-point decoding.
//
// Jacobi decoding solves y_i = argmax p(y | y_<i, x) for all slots at once:
// every pass feeds the current iterate through one forward and replaces each
// slot with its argmax, stopping when an iterate reproduces itself. With
// horizon n < l the response is cut into consecutive blocks; each block is
// solved by Jacobi iteration and then frozen into the context of the next
// (a Gauss-Seidel sweep over blocks).
//
// Causal mode carries two facts every test leans on:
//   * after local pass j the first j slots of the block equal the final
//     output and never change again (prefix fixing), so a block of size s
//     needs at most s changing passes plus one confirming pass;
//   * the fixed point equals the greedy autoregressive output.
// Bidirectional mode has neither guarantee and is capped by max_passes with
// cycle detection.

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pardec/error.hpp"
#include "pardec/model.hpp"
#include "pardec/rng.hpp"
#include "pardec/types.hpp"

namespace pardec {

/// Anything that can take a greedy autoregressive step and a parallel
/// (Jacobi) update over a response window.
template <typename M>
concept NextTokenModel = requires(const M& m, std::span<const TokenId> ctx, std::span<const TokenId> resp,
                                  MaskMode mode) {
  { ar_step(m, ctx) } -> std::convertible_to<TokenId>;
  { jacobi_update(m, ctx, resp, mode) } -> std::convertible_to<TokenSequence>;
};

template <typename Scalar>
TokenId ar_step(const BasicToyModel<Scalar>& model, std::span<const TokenId> context) {
  return greedy_argmax(next_token_logits(model, context));
}

template <typename Scalar>
TokenSequence jacobi_update(const BasicToyModel<Scalar>& model, std::span<const TokenId> context,
                            std::span<const TokenId> response, MaskMode mode) {
  const auto logits = forward_logits(model, context, response, mode);
  TokenSequence next(response.size());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) next[static_cast<std::size_t>(i)] = greedy_argmax(logits.row(i));
  return next;
}

enum class DecodeMode : std::uint8_t { AR, JacobiCausal, JacobiBidirectional };

inline MaskMode mask_for(DecodeMode mode) {
  return mode == DecodeMode::JacobiBidirectional ? MaskMode::ResponseBidirectional : MaskMode::Causal;
}

struct InitPolicy {
  enum class Kind : std::uint8_t { ConstantToken, SeededUniformActionBlock };
  Kind kind = Kind::SeededUniformActionBlock;
  TokenId token = 0;               // ConstantToken
  std::uint64_t seed = 0;          // SeededUniformActionBlock
  TokenId action_token_base = 0;   // SeededUniformActionBlock

  static InitPolicy constant(TokenId token) { return {Kind::ConstantToken, token, 0, 0}; }
  static InitPolicy uniform_action_block(std::uint64_t seed, TokenId base) {
    return {Kind::SeededUniformActionBlock, 0, seed, base};
  }
};

/// Y^(0) for all l slots. Seeded slot i is base + below(draw(key, i), 256)
/// with key = stream_key(seed, 0, fnv1a("init")).
inline TokenSequence initial_iterate(const InitPolicy& policy, std::size_t length) {
  TokenSequence out(length, policy.token);
  if (policy.kind == InitPolicy::Kind::SeededUniformActionBlock) {
    const std::uint64_t key = rng::stream_key(policy.seed, 0, rng::fnv1a("init"));
    for (std::size_t i = 0; i < length; ++i)
      out[i] = policy.action_token_base + static_cast<TokenId>(rng::below(rng::draw(key, i), 256));
  }
  return out;
}

struct DecoderConfig {
  DecodeMode mode = DecodeMode::JacobiCausal;
  std::size_t horizon = 37;
  std::size_t total_length = 37;
  InitPolicy init{};
  std::optional<std::size_t> max_passes;     // per block; default n+1 causal, 4n bidirectional
  std::optional<bool> cycle_detection;       // default on for bidirectional only

  std::size_t resolved_max_passes() const {
    if (max_passes) return *max_passes;
    return mode == DecodeMode::JacobiBidirectional ? 4 * horizon : horizon + 1;
  }
  bool resolved_cycle_detection() const {
    return cycle_detection.value_or(mode == DecodeMode::JacobiBidirectional);
  }
};

inline void validate(const DecoderConfig& cfg) {
  if (cfg.total_length == 0) throw ConfigError("decoder: total_length must be >= 1");
  if (cfg.mode == DecodeMode::AR) return;
  if (cfg.horizon < 1 || cfg.horizon > cfg.total_length)
    throw ConfigError("decoder: horizon " + std::to_string(cfg.horizon) + " must lie in 1.." +
                      std::to_string(cfg.total_length));
  if (cfg.resolved_max_passes() < 2) throw ConfigError("decoder: max_passes must be >= 2");
}

/// One Jacobi system. Slot indices are local to the block.
struct BlockTrace {
  std::size_t start = 0;
  std::size_t end = 0;
  std::vector<TokenSequence> iterates;                   // Y^(0) .. Y^(k)
  std::vector<std::vector<std::size_t>> changed_positions;  // one entry per pass
  std::vector<std::size_t> fixed_token_counts;           // one entry per iterate, against iterates.back()
  std::size_t passes = 0;
  std::size_t passes_changing = 0;
  bool converged = false;

  std::size_t size() const noexcept { return end - start; }
};

struct DecodeTrace {
  DecodeMode mode = DecodeMode::AR;
  std::size_t response_length = 0;
  std::size_t horizon = 0;
  std::vector<BlockTrace> blocks;
  std::size_t passes_total = 0;
  std::size_t passes_changing = 0;
  bool converged = false;

  std::vector<std::pair<std::size_t, std::size_t>> block_boundaries() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& b : blocks) out.emplace_back(b.start, b.end);
    return out;
  }
  TokenSequence output() const {
    TokenSequence out;
    for (const auto& b : blocks)
      if (!b.iterates.empty()) out.insert(out.end(), b.iterates.back().begin(), b.iterates.back().end());
    return out;
  }
};

class DecodeError : public Error {
 public:
  DecodeError(ErrorKind kind, const std::string& what, DecodeTrace trace, std::size_t block)
      : Error(kind, what), trace_(std::move(trace)), block_(block) {}
  const DecodeTrace& trace() const noexcept { return trace_; }
  std::size_t block_index() const noexcept { return block_; }

 private:
  DecodeTrace trace_;
  std::size_t block_;
};

struct DecodeResult {
  TokenSequence tokens;
  DecodeTrace trace;
};

/// Sizes of the consecutive blocks covering `length` slots at horizon n.
inline std::vector<std::size_t> block_sizes(std::size_t length, std::size_t horizon) {
  std::vector<std::size_t> sizes;
  for (std::size_t start = 0; start < length; start += horizon) sizes.push_back(std::min(horizon, length - start));
  return sizes;
}

/// Greedy autoregressive decoding: l passes, one new slot per pass. The
/// recorded iterates are the emitted prefixes (lengths 0..l).
template <NextTokenModel Model>
DecodeResult decode_ar(const Model& model, std::span<const TokenId> prompt, std::size_t length) {
  if (prompt.empty()) throw ConfigError("decoder: prompt must be nonempty");
  DecodeTrace trace;
  trace.mode = DecodeMode::AR;
  trace.response_length = length;
  trace.horizon = 1;
  BlockTrace block;
  block.start = 0;
  block.end = length;
  block.iterates.emplace_back();
  block.fixed_token_counts.push_back(0);

  TokenSequence context(prompt.begin(), prompt.end());
  TokenSequence emitted;
  emitted.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const TokenId next = ar_step(model, std::span<const TokenId>(context));
    context.push_back(next);
    emitted.push_back(next);
    block.iterates.push_back(emitted);
    block.changed_positions.push_back({i});
    block.fixed_token_counts.push_back(i + 1);
  }
  block.passes = block.passes_changing = length;
  block.converged = true;
  trace.blocks.push_back(std::move(block));
  trace.passes_total = trace.passes_changing = length;
  trace.converged = true;
  return {std::move(emitted), std::move(trace)};
}

namespace detail {

inline std::uint64_t hash_tokens(const TokenSequence& seq) {
  std::uint64_t h = rng::splitmix64(seq.size());
  for (TokenId t : seq) h = rng::splitmix64(h ^ static_cast<std::uint32_t>(t));
  return h;
}

inline void finish_block(BlockTrace& block) {
  const auto& final_iterate = block.iterates.back();
  block.fixed_token_counts.clear();
  for (const auto& it : block.iterates) {
    std::size_t same = 0;
    for (std::size_t i = 0; i < it.size(); ++i) same += it[i] == final_iterate[i];
    block.fixed_token_counts.push_back(same);
  }
}

inline void accumulate(DecodeTrace& trace, const BlockTrace& block) {
  trace.passes_total += block.passes;
  trace.passes_changing += block.passes_changing;
}

template <NextTokenModel Model>
DecodeResult decode_blocks(const Model& model, std::span<const TokenId> prompt, const DecoderConfig& cfg) {
  validate(cfg);
  if (cfg.mode == DecodeMode::AR) throw ConfigError("decoder: Jacobi decoding requested with AR mode");
  if (prompt.empty()) throw ConfigError("decoder: prompt must be nonempty");
  const MaskMode mask = mask_for(cfg.mode);
  const std::size_t max_passes = cfg.resolved_max_passes();
  const bool detect_cycles = cfg.resolved_cycle_detection();
  const TokenSequence init = initial_iterate(cfg.init, cfg.total_length);

  DecodeTrace trace;
  trace.mode = cfg.mode;
  trace.response_length = cfg.total_length;
  trace.horizon = cfg.horizon;

  TokenSequence context(prompt.begin(), prompt.end());
  std::size_t start = 0;
  for (std::size_t size : block_sizes(cfg.total_length, cfg.horizon)) {
    const std::size_t index = trace.blocks.size();
    BlockTrace block;
    block.start = start;
    block.end = start + size;
    block.iterates.emplace_back(init.begin() + static_cast<std::ptrdiff_t>(start),
                                init.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
    if (detect_cycles) seen[hash_tokens(block.iterates[0])].push_back(0);

    std::optional<std::size_t> cycle_from;
    while (block.passes < max_passes) {
      const TokenSequence& current = block.iterates.back();
      TokenSequence next = jacobi_update(model, std::span<const TokenId>(context), std::span<const TokenId>(current), mask);
      std::vector<std::size_t> changed;
      for (std::size_t i = 0; i < size; ++i)
        if (next[i] != current[i]) changed.push_back(i);
      ++block.passes;
      if (!changed.empty()) ++block.passes_changing;
      block.changed_positions.push_back(std::move(changed));
      const bool fixed = block.changed_positions.back().empty();
      block.iterates.push_back(std::move(next));
      if (fixed) {
        block.converged = true;
        break;
      }
      if (detect_cycles) {
        const std::size_t at = block.iterates.size() - 1;
        auto& bucket = seen[hash_tokens(block.iterates[at])];
        for (std::size_t earlier : bucket)
          if (block.iterates[earlier] == block.iterates[at]) cycle_from = earlier;
        if (cycle_from) break;
        bucket.push_back(at);
      }
    }
    finish_block(block);
    accumulate(trace, block);
    trace.blocks.push_back(std::move(block));
    const BlockTrace& done = trace.blocks.back();

    if (cycle_from) {
      const std::string what = "decoder: cycle detected in block " + std::to_string(index) + " (iterate " +
                               std::to_string(done.iterates.size() - 1) + " repeats iterate " +
                               std::to_string(*cycle_from) + ")";
      throw DecodeError(ErrorKind::CycleDetected, what, std::move(trace), index);
    }
    if (!done.converged) {
      const std::string what = "decoder: no fixed point in block " + std::to_string(index) + " after " +
                               std::to_string(max_passes) + " passes";
      throw DecodeError(ErrorKind::NonConvergence, what, std::move(trace), index);
    }
    context.insert(context.end(), done.iterates.back().begin(), done.iterates.back().end());
    start += size;
  }
  trace.converged = true;
  return {trace.output(), std::move(trace)};
}

}  // namespace detail

/// Single Jacobi system over all l slots (requires horizon == total_length).
template <NextTokenModel Model>
DecodeResult decode_jacobi(const Model& model, std::span<const TokenId> prompt, const DecoderConfig& cfg) {
  if (cfg.horizon != cfg.total_length)
    throw ConfigError("decoder: decode_jacobi needs horizon == total_length; use decode_blocked");
  return detail::decode_blocks(model, prompt, cfg);
}

/// Jacobi within blocks of `horizon` slots, Gauss-Seidel across blocks
/// (requires horizon < total_length).
template <NextTokenModel Model>
DecodeResult decode_blocked(const Model& model, std::span<const TokenId> prompt, const DecoderConfig& cfg) {
  if (cfg.horizon >= cfg.total_length)
    throw ConfigError("decoder: decode_blocked needs horizon < total_length; use decode_jacobi");
  return detail::decode_blocks(model, prompt, cfg);
}

/// Dispatches on mode and horizon.
template <NextTokenModel Model>
DecodeResult decode(const Model& model, std::span<const TokenId> prompt, const DecoderConfig& cfg) {
  if (cfg.mode == DecodeMode::AR) return decode_ar(model, prompt, cfg.total_length);
  if (cfg.horizon == cfg.total_length) return decode_jacobi(model, prompt, cfg);
  return decode_blocked(model, prompt, cfg);
}

/// Full-length snapshot after global pass j: finished blocks at their fixed
/// point, the active block at its current iterate, later blocks at Y^(0).
/// For AR traces the snapshot is the emitted prefix.
inline TokenSequence global_iterate(const DecodeTrace& trace, std::size_t pass) {
  if (pass > trace.passes_total)
    throw Error(ErrorKind::Range, "trace: pass " + std::to_string(pass) + " beyond passes_total " +
                                      std::to_string(trace.passes_total));
  if (trace.mode == DecodeMode::AR) return trace.blocks.front().iterates[pass];
  TokenSequence out;
  std::size_t remaining = pass;
  for (const auto& b : trace.blocks) {
    const std::size_t local = std::min(remaining, b.passes);
    out.insert(out.end(), b.iterates[local].begin(), b.iterates[local].end());
    remaining -= local;
  }
  return out;
}

/// Number of slots of the global iterate at pass j that already equal the
/// final output.
inline std::size_t fixed_token_count(const DecodeTrace& trace, std::size_t pass) {
  const TokenSequence now = global_iterate(trace, pass);
  const TokenSequence final_output = trace.output();
  std::size_t same = 0;
  for (std::size_t i = 0; i < now.size(); ++i) same += now[i] == final_output[i];
  return same;
}

/// Sum over blocks of the fixed-token count one iterate before the block
/// first reached its fixed point (iterate k-2 for a block certified at k).
inline std::size_t fixed_tokens_before_convergence(const DecodeTrace& trace) {
  std::size_t total = 0;
  for (const auto& b : trace.blocks) {
    const std::size_t idx = b.passes >= 2 ? b.passes - 2 : 0;
    total += b.fixed_token_counts[idx];
  }
  return total;
}

/// Mean over blocks of the fixed-token count after the first pass.
inline double fixed_tokens_at_first_pass(const DecodeTrace& trace) {
  if (trace.blocks.empty()) return 0.0;
  double total = 0.0;
  for (const auto& b : trace.blocks) total += static_cast<double>(b.fixed_token_counts[std::min<std::size_t>(1, b.passes)]);
  return total / static_cast<double>(trace.blocks.size());
}

/// First iterate index from which each slot of a block stays at its final value.
inline std::vector<std::size_t> stabilization_passes(const BlockTrace& block) {
  const auto& final_iterate = block.iterates.back();
  std::vector<std::size_t> settle(block.size(), 0);
  for (std::size_t i = 0; i < block.size(); ++i) {
    std::size_t s = block.iterates.size() - 1;
    while (s > 0 && block.iterates[s - 1][i] == final_iterate[i]) --s;
    settle[i] = s;
  }
  return settle;
}

/// Tokens predicted correctly, and kept, no later than their left neighbour
/// settled: correct before all preceding tokens were. Slot 0 of each block
/// and tokens that were right from the initial guess are not counted.
inline std::size_t preemptive_fixed_tokens(const DecodeTrace& trace) {
  if (trace.mode == DecodeMode::AR) return 0;
  std::size_t total = 0;
  for (const auto& b : trace.blocks) {
    const auto settle = stabilization_passes(b);
    for (std::size_t i = 1; i < settle.size(); ++i) total += settle[i] >= 1 && settle[i] <= settle[i - 1];
  }
  return total;
}

/// Length of the longest prefix of `a` matching `b`.
inline std::size_t matching_prefix(std::span<const TokenId> a, std::span<const TokenId> b) {
  std::size_t i = 0;
  while (i < a.size() && i < b.size() && a[i] == b[i]) ++i;
  return i;
}

/// Re-runs one update pass per block over the returned output and checks
/// that nothing moves.
template <NextTokenModel Model>
bool certify_fixed_point(const Model& model, std::span<const TokenId> prompt, const DecodeTrace& trace) {
  if (trace.mode == DecodeMode::AR || !trace.converged) return false;
  const MaskMode mask = mask_for(trace.mode);
  const TokenSequence output = trace.output();
  TokenSequence context(prompt.begin(), prompt.end());
  for (const auto& b : trace.blocks) {
    const std::span<const TokenId> slice(output.data() + b.start, b.size());
    if (jacobi_update(model, std::span<const TokenId>(context), slice, mask) != TokenSequence(slice.begin(), slice.end()))
      return false;
    context.insert(context.end(), slice.begin(), slice.end());
  }
  return true;
}

inline std::string to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::AR: return "ar";
    case DecodeMode::JacobiCausal: return "jacobi-causal";
    case DecodeMode::JacobiBidirectional: return "jacobi-bidirectional";
  }
  return "?";
}

inline DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "ar") return DecodeMode::AR;
  if (s == "jacobi-causal" || s == "causal") return DecodeMode::JacobiCausal;
  if (s == "jacobi-bidirectional" || s == "bidirectional") return DecodeMode::JacobiBidirectional;
  throw ConfigError("unknown decode mode '" + s + "' (expected ar, jacobi-causal, jacobi-bidirectional)");
}

}  // namespace pardec
