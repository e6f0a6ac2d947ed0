#pragma once

// 7-DoF action chunks <-> action tokens.
//
// Each dimension is cut into 256 equal bins over its [lo, hi] range; bin b is
// emitted as token action_token_base + b. A chunk of m actions is framed as
//   [begin] X Y Z phi theta psi G  ...  X Y Z phi theta psi G [end]
// for a response length of 7m + 2 tokens.

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "pardec/error.hpp"
#include "pardec/types.hpp"

namespace pardec {

constexpr std::size_t kActionDims = 7;
constexpr int kBins = 256;

enum class ActionDim : std::size_t { X, Y, Z, Roll, Pitch, Yaw, Gripper };

/// One action: x, y, z (m), phi, theta, psi (rad), gripper in [0, 1].
using ActionVector = Eigen::Matrix<double, 1, static_cast<int>(kActionDims)>;
/// m actions, one per row.
using ActionChunk = Eigen::Matrix<double, Eigen::Dynamic, static_cast<int>(kActionDims), Eigen::RowMajor>;

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  double bin_width() const noexcept { return (hi - lo) / kBins; }
};

class CodecError : public Error {
 public:
  enum class Reason { Framing, AlienToken, BinRange };

  CodecError(Reason reason, const std::string& what, std::optional<std::size_t> position = std::nullopt)
      : Error(ErrorKind::Codec, what), reason_(reason), position_(position) {}

  Reason reason() const noexcept { return reason_; }
  /// Offending token position for AlienToken errors.
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  Reason reason_;
  std::optional<std::size_t> position_;
};

struct CodecConfig {
  std::array<Range, kActionDims> ranges{};
  TokenId action_token_base = 0;
  TokenId begin_token = 1;
  TokenId end_token = 2;
  std::size_t chunk_size = 5;

  std::size_t response_length() const noexcept { return kActionDims * chunk_size + 2; }
  bool is_action_token(TokenId t) const noexcept {
    return t >= action_token_base && t < action_token_base + kBins;
  }
};

/// Position +-0.5 m, rotation +-pi rad, gripper [0, 1]; the action block is
/// the top 256 ids of the vocabulary.
CodecConfig default_codec_config(std::size_t vocab_size, std::size_t chunk_size = 5);

/// Throws ConfigError on a degenerate range, an empty chunk, or begin/end
/// tokens that collide with the action block or fall outside the vocabulary.
void validate(const CodecConfig& cfg, std::size_t vocab_size);

/// floor((clamp(v) - lo) / (hi - lo) * 256), with v == hi mapped to 255.
int quantize(double value, Range range);

/// Bin midpoint lo + (hi - lo) * (bin + 0.5) / 256.
double dequantize(int bin, Range range);

TokenSequence encode_chunk(const ActionChunk& chunk, const CodecConfig& cfg);

/// Strict parse; never repairs. Framing errors for bad length or missing
/// begin/end, AlienToken (with position) for non-action interior tokens.
ActionChunk decode_chunk(const TokenSequence& tokens, const CodecConfig& cfg);

struct CodecFuzzReport {
  std::size_t bijection_cases = 0;
  std::size_t bijection_failures = 0;
  std::size_t samples = 0;
  std::size_t roundtrip_failures = 0;
  double max_error_ratio = 0.0;  // worst |dequantize(quantize(v)) - clamp(v)| / half bin width
  std::size_t framing_cases = 0;
  std::size_t framing_failures = 0;

  bool passed() const noexcept {
    return bijection_failures == 0 && roundtrip_failures == 0 && framing_failures == 0;
  }
};

/// Exhaustive bin bijection over all 7 ranges, `samples` seeded scalar
/// round trips per dimension drawn from [lo - w/4, hi + w/4] (w = hi - lo,
/// so clamping is exercised), and framed chunk round trips for m in 1..16.
CodecFuzzReport codec_fuzz(const CodecConfig& cfg, std::size_t samples, std::uint64_t seed);

}  // namespace pardec
