#include "pardec/action_codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pardec/rng.hpp"

namespace pardec {

namespace {

void check_range(Range r) {
  if (!(r.lo < r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
    throw ConfigError("codec: degenerate range [" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]");
}

}  // namespace

CodecConfig default_codec_config(std::size_t vocab_size, std::size_t chunk_size) {
  CodecConfig cfg;
  const double pi = std::numbers::pi;
  cfg.ranges = {Range{-0.5, 0.5}, Range{-0.5, 0.5}, Range{-0.5, 0.5}, Range{-pi, pi},
                Range{-pi, pi},   Range{-pi, pi},   Range{0.0, 1.0}};
  cfg.action_token_base = static_cast<TokenId>(vocab_size) - kBins;
  cfg.chunk_size = chunk_size;
  return cfg;
}

void validate(const CodecConfig& cfg, std::size_t vocab_size) {
  for (const auto& r : cfg.ranges) check_range(r);
  if (cfg.chunk_size == 0) throw ConfigError("codec: chunk_size must be >= 1");
  if (cfg.action_token_base < 0 || static_cast<std::size_t>(cfg.action_token_base) + kBins > vocab_size)
    throw ConfigError("codec: action block [" + std::to_string(cfg.action_token_base) + ", " +
                      std::to_string(cfg.action_token_base + kBins - 1) + "] does not fit vocab_size " +
                      std::to_string(vocab_size));
  for (TokenId t : {cfg.begin_token, cfg.end_token}) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size)
      throw ConfigError("codec: begin/end token " + std::to_string(t) + " outside vocabulary");
    if (cfg.is_action_token(t))
      throw ConfigError("codec: begin/end token " + std::to_string(t) + " lies inside the action block");
  }
  if (cfg.begin_token == cfg.end_token) throw ConfigError("codec: begin and end tokens must differ");
}

int quantize(double value, Range range) {
  check_range(range);
  if (std::isnan(value)) throw CodecError(CodecError::Reason::BinRange, "codec: cannot quantize NaN");
  const double v = std::clamp(value, range.lo, range.hi);
  const double scaled = std::floor((v - range.lo) / (range.hi - range.lo) * kBins);
  return std::min(static_cast<int>(scaled), kBins - 1);
}

double dequantize(int bin, Range range) {
  check_range(range);
  if (bin < 0 || bin >= kBins)
    throw CodecError(CodecError::Reason::BinRange, "codec: bin " + std::to_string(bin) + " outside 0..255");
  return range.lo + (range.hi - range.lo) * (bin + 0.5) / kBins;
}

TokenSequence encode_chunk(const ActionChunk& chunk, const CodecConfig& cfg) {
  if (static_cast<std::size_t>(chunk.rows()) != cfg.chunk_size)
    throw CodecError(CodecError::Reason::Framing, "codec: chunk has " + std::to_string(chunk.rows()) +
                                                      " actions, expected " + std::to_string(cfg.chunk_size));
  TokenSequence out;
  out.reserve(cfg.response_length());
  out.push_back(cfg.begin_token);
  for (Eigen::Index a = 0; a < chunk.rows(); ++a)
    for (std::size_t d = 0; d < kActionDims; ++d)
      out.push_back(cfg.action_token_base + quantize(chunk(a, static_cast<Eigen::Index>(d)), cfg.ranges[d]));
  out.push_back(cfg.end_token);
  return out;
}

ActionChunk decode_chunk(const TokenSequence& tokens, const CodecConfig& cfg) {
  if (tokens.size() != cfg.response_length())
    throw CodecError(CodecError::Reason::Framing, "codec: length " + std::to_string(tokens.size()) +
                                                      " is not 7*" + std::to_string(cfg.chunk_size) + "+2");
  if (tokens.front() != cfg.begin_token)
    throw CodecError(CodecError::Reason::Framing, "codec: missing begin token at position 0", 0);
  if (tokens.back() != cfg.end_token)
    throw CodecError(CodecError::Reason::Framing,
                     "codec: missing end token at position " + std::to_string(tokens.size() - 1),
                     tokens.size() - 1);
  ActionChunk chunk(static_cast<Eigen::Index>(cfg.chunk_size), static_cast<Eigen::Index>(kActionDims));
  for (std::size_t pos = 1; pos + 1 < tokens.size(); ++pos) {
    const TokenId t = tokens[pos];
    if (!cfg.is_action_token(t))
      throw CodecError(CodecError::Reason::AlienToken,
                       "codec: non-action token " + std::to_string(t) + " at position " + std::to_string(pos), pos);
    const std::size_t slot = pos - 1;
    chunk(static_cast<Eigen::Index>(slot / kActionDims), static_cast<Eigen::Index>(slot % kActionDims)) =
        dequantize(t - cfg.action_token_base, cfg.ranges[slot % kActionDims]);
  }
  return chunk;
}

CodecFuzzReport codec_fuzz(const CodecConfig& cfg, std::size_t samples, std::uint64_t seed) {
  // Relative slack for rounding in the midpoint arithmetic.
  constexpr double kSlack = 1e-12;
  CodecFuzzReport rep;
  for (const auto& r : cfg.ranges) {
    for (int b = 0; b < kBins; ++b) {
      ++rep.bijection_cases;
      rep.bijection_failures += quantize(dequantize(b, r), r) != b;
    }
  }

  for (std::size_t d = 0; d < kActionDims; ++d) {
    const Range r = cfg.ranges[d];
    const double width = r.hi - r.lo;
    const double half_bin = r.bin_width() / 2;
    const std::uint64_t key = rng::stream_key(seed, d, rng::fnv1a("codec-fuzz"));
    for (std::size_t i = 0; i < samples; ++i) {
      const double v = r.lo - width / 4 + 1.5 * width * rng::unit(rng::draw(key, i));
      const double err = std::abs(dequantize(quantize(v, r), r) - std::clamp(v, r.lo, r.hi));
      rep.max_error_ratio = std::max(rep.max_error_ratio, err / half_bin);
      rep.roundtrip_failures += err > half_bin * (1 + kSlack);
      ++rep.samples;
    }
  }

  const std::uint64_t key = rng::stream_key(seed, 99, rng::fnv1a("codec-fuzz-chunks"));
  std::uint64_t counter = 0;
  for (std::size_t m = 1; m <= 16; ++m) {
    CodecConfig c = cfg;
    c.chunk_size = m;
    ActionChunk chunk(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(kActionDims));
    for (Eigen::Index a = 0; a < chunk.rows(); ++a)
      for (std::size_t d = 0; d < kActionDims; ++d) {
        const Range r = c.ranges[d];
        chunk(a, static_cast<Eigen::Index>(d)) = r.lo + (r.hi - r.lo) * rng::unit(rng::draw(key, counter++));
      }
    ++rep.framing_cases;
    try {
      const TokenSequence tokens = encode_chunk(chunk, c);
      bool ok = tokens.size() == 7 * m + 2 && tokens.front() == c.begin_token && tokens.back() == c.end_token;
      const ActionChunk back = decode_chunk(tokens, c);
      for (Eigen::Index a = 0; a < chunk.rows(); ++a)
        for (std::size_t d = 0; d < kActionDims; ++d) {
          const auto col = static_cast<Eigen::Index>(d);
          ok &= std::abs(back(a, col) - chunk(a, col)) <= c.ranges[d].bin_width() / 2 * (1 + kSlack);
        }
      rep.framing_failures += !ok;
    } catch (const CodecError&) {
      ++rep.framing_failures;
    }
  }
  return rep;
}

}  // namespace pardec
