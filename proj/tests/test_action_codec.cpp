#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pardec/action_codec.hpp"
#include "pardec/json_io.hpp"
#include "pardec/rng.hpp"

using namespace pardec;

TEST_CASE("quantize edges and midpoints") {
  const Range r{-0.5, 0.5};
  CHECK(quantize(r.lo, r) == 0);
  CHECK(quantize(r.hi, r) == 255);
  CHECK(quantize(-10.0, r) == 0);
  CHECK(quantize(10.0, r) == 255);
  for (int k = 0; k < 256; ++k) CHECK(quantize(r.lo + (r.hi - r.lo) * (k + 0.5) / 256, r) == k);
}

TEST_CASE("dequantize returns bin midpoints") {
  CHECK(dequantize(0, Range{0, 1}) == 1.0 / 512);
  CHECK(dequantize(255, Range{0, 1}) == 511.0 / 512);
  CHECK_THROWS_AS(dequantize(256, Range{0, 1}), CodecError);
  CHECK_THROWS_AS(dequantize(-1, Range{0, 1}), CodecError);
}

TEST_CASE("degenerate ranges and NaN are errors") {
  CHECK_THROWS_AS(quantize(0.0, Range{1, 1}), ConfigError);
  CHECK_THROWS_AS(quantize(0.0, Range{2, 1}), ConfigError);
  CHECK_THROWS_AS(dequantize(3, Range{1, 1}), ConfigError);
  CHECK_THROWS_AS(quantize(std::nan(""), Range{0, 1}), CodecError);
}

TEST_CASE("bins form a bijection for every default range") {
  const auto cfg = default_codec_config(512);
  for (const auto& r : cfg.ranges)
    for (int b = 0; b < kBins; ++b) REQUIRE(quantize(dequantize(b, r), r) == b);
}

TEST_CASE("reconstruction error stays within half a bin") {
  const auto cfg = default_codec_config(512);
  for (std::size_t d = 0; d < kActionDims; ++d) {
    const Range r = cfg.ranges[d];
    const double w = r.hi - r.lo;
    for (std::uint64_t i = 0; i < 100000; ++i) {
      const double v = r.lo - w / 4 + 1.5 * w * rng::unit(rng::draw(d + 100, i));
      const double err = std::abs(dequantize(quantize(v, r), r) - std::clamp(v, r.lo, r.hi));
      REQUIRE(err <= r.bin_width() / 2 * (1 + 1e-12));
    }
  }
}

TEST_CASE("default config places the action block at the top of the vocabulary") {
  const auto cfg = default_codec_config(512);
  CHECK(cfg.action_token_base == 256);
  CHECK(cfg.ranges[0].lo == -0.5);
  CHECK(cfg.ranges[3].hi == std::numbers::pi);
  CHECK(cfg.ranges[6].lo == 0.0);
  CHECK(cfg.ranges[6].hi == 1.0);
  CHECK_NOTHROW(validate(cfg, 512));
  CHECK(cfg.response_length() == 37);
}

TEST_CASE("config validation") {
  auto cfg = default_codec_config(512);
  cfg.begin_token = 300;
  CHECK_THROWS_AS(validate(cfg, 512), ConfigError);
  cfg = default_codec_config(512);
  cfg.end_token = cfg.begin_token;
  CHECK_THROWS_AS(validate(cfg, 512), ConfigError);
  cfg = default_codec_config(512);
  cfg.ranges[2] = Range{0.3, 0.3};
  CHECK_THROWS_AS(validate(cfg, 512), ConfigError);
  cfg = default_codec_config(512);
  cfg.chunk_size = 0;
  CHECK_THROWS_AS(validate(cfg, 512), ConfigError);
  cfg = default_codec_config(512);
  CHECK_THROWS_AS(validate(cfg, 400), ConfigError);
}

TEST_CASE("encode_chunk framing") {
  auto cfg = default_codec_config(512, 5);
  ActionChunk chunk = ActionChunk::Zero(5, 7);
  CHECK(encode_chunk(chunk, cfg).size() == 37);

  cfg.chunk_size = 1;
  ActionChunk low(1, 7);
  for (std::size_t d = 0; d < kActionDims; ++d) low(0, static_cast<Eigen::Index>(d)) = cfg.ranges[d].lo;
  const TokenSequence expected{cfg.begin_token, 256, 256, 256, 256, 256, 256, 256, cfg.end_token};
  CHECK(encode_chunk(low, cfg) == expected);

  CHECK_THROWS_AS(encode_chunk(ActionChunk::Zero(2, 7), cfg), CodecError);

  for (std::size_t m = 1; m <= 16; ++m) {
    cfg.chunk_size = m;
    const auto tokens = encode_chunk(ActionChunk::Constant(static_cast<Eigen::Index>(m), 7, 0.25), cfg);
    CHECK(tokens.size() == 7 * m + 2);
    CHECK(tokens.front() == cfg.begin_token);
    CHECK(tokens.back() == cfg.end_token);
  }
}

TEST_CASE("decode_chunk parses strictly") {
  const auto cfg = default_codec_config(512, 5);
  ActionChunk chunk(5, 7);
  for (Eigen::Index a = 0; a < 5; ++a) chunk.row(a) << 0.1 * a, -0.2, 0.3, 1.0, -2.0, 0.5, a % 2;
  const auto tokens = encode_chunk(chunk, cfg);
  const auto back = decode_chunk(tokens, cfg);
  CHECK(back.rows() == 5);
  for (Eigen::Index a = 0; a < 5; ++a)
    for (Eigen::Index d = 0; d < 7; ++d)
      CHECK(std::abs(back(a, d) - chunk(a, d)) <= cfg.ranges[static_cast<std::size_t>(d)].bin_width() / 2);

  auto alien = tokens;
  alien[3] = cfg.begin_token;
  try {
    decode_chunk(alien, cfg);
    FAIL("expected an alien-token error");
  } catch (const CodecError& e) {
    CHECK(e.reason() == CodecError::Reason::AlienToken);
    REQUIRE(e.position().has_value());
    CHECK(*e.position() == 3);
  }

  const TokenSequence short_seq(36, 300);
  try {
    decode_chunk(short_seq, cfg);
    FAIL("expected a framing error");
  } catch (const CodecError& e) {
    CHECK(e.reason() == CodecError::Reason::Framing);
  }

  auto no_end = tokens;
  no_end.back() = 300;
  CHECK_THROWS_AS(decode_chunk(no_end, cfg), CodecError);
}

TEST_CASE("gripper values land in the extreme bins") {
  const Range g{0.0, 1.0};
  CHECK(quantize(0.0, g) == 0);
  CHECK(quantize(1.0, g) == 255);
}

TEST_CASE("codec_fuzz passes on the default config") {
  const auto rep = codec_fuzz(default_codec_config(512), 2000, 3);
  CHECK(rep.passed());
  CHECK(rep.bijection_cases == 7 * 256);
  CHECK(rep.samples == 7 * 2000);
  CHECK(rep.framing_cases == 16);
  CHECK(rep.max_error_ratio <= 1.0 + 1e-12);
}

TEST_CASE("chunk json round trip and validation") {
  ActionChunk chunk(2, 7);
  chunk << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 1.0, -0.1, -0.2, -0.3, -0.4, -0.5, -0.6, 0.0;
  const auto j = chunk_to_json(chunk);
  CHECK(j.size() == 2);
  CHECK(j[0].size() == 7);
  CHECK(chunk_from_json(j) == chunk);
  CHECK_THROWS_AS(chunk_from_json(json::parse("[[1,2,3]]")), CodecError);
  CHECK_THROWS_AS(chunk_from_json(json::parse("{}")), CodecError);
}
