#include <doctest.h>

#include "pardec/config.hpp"

using namespace pardec;

TEST_CASE("empty config yields the defaults") {
  const auto cfg = parse_run_config("");
  CHECK(cfg.model.vocab_size == 512);
  CHECK(cfg.codec.chunk_size == 5);
  CHECK(cfg.codec.response_length() == 37);
  CHECK(cfg.codec.action_token_base == 256);
  CHECK(cfg.bench.horizons == std::vector<std::size_t>{7, 16, 37});
  CHECK(cfg.bench.prompt_length == 16);
  CHECK(cfg.decoder.mode == DecodeMode::JacobiCausal);
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("sections override defaults") {
  const auto cfg = parse_run_config(R"(
model:
  vocab_size: 1024
  seed: 9
  init: zero
codec:
  chunk_size: 3
decoder:
  mode: jacobi-bidirectional
  max_passes: 10
  init: constant
  constant_token: 4
bench:
  horizons: [4, 23]
  trials: 2
  modes: [jacobi-causal, jacobi-bidirectional]
output:
  dir: out
  csv: false
)");
  CHECK(cfg.model.vocab_size == 1024);
  CHECK(cfg.model.init == WeightInit::Zero);
  CHECK(cfg.codec.action_token_base == 768);
  CHECK(cfg.codec.response_length() == 23);
  CHECK(cfg.decoder.mode == DecodeMode::JacobiBidirectional);
  CHECK(cfg.bench.modes.size() == 2);
  CHECK_FALSE(cfg.output.csv);
  CHECK_NOTHROW(validate(cfg));

  const auto dc = decoder_config(cfg, DecodeMode::JacobiCausal, 23);
  CHECK(dc.total_length == 23);
  CHECK(dc.init.kind == InitPolicy::Kind::ConstantToken);
  CHECK(dc.init.token == 4);
  CHECK(dc.max_passes == 10u);

  const auto bc = bench_config(cfg);
  CHECK(bc.horizons == std::vector<std::size_t>{4, 23});
  CHECK(bc.codec.action_token_base == 768);
}

TEST_CASE("explicit action base survives vocabulary changes") {
  const auto cfg = parse_run_config("model: {vocab_size: 1024}\ncodec: {action_token_base: 300}\n");
  CHECK(cfg.codec.action_token_base == 300);
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(parse_run_config("modle: {}\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("model: {vocab: 3}\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("model: {d_model: abc}\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("decoder: {mode: sideways}\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("decoder: {init: random}\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("codec: {ranges: [[0, 1]]}\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[1, 2]\n"), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/pardec.yaml"), IoError);
}

TEST_CASE("validation catches cross-field problems") {
  // l = 7 * 20 + 2 = 142 does not fit in max_seq 128.
  CHECK_THROWS_AS(validate(parse_run_config("codec: {chunk_size: 20}\n")), ConfigError);
  // 37 + 100 > 128.
  CHECK_THROWS_AS(validate(parse_run_config("bench: {prompt_length: 100}\n")), ConfigError);
  CHECK_THROWS_AS(validate(parse_run_config("bench: {horizons: [0]}\n")), ConfigError);
  CHECK_THROWS_AS(validate(parse_run_config("bench: {horizons: [38]}\n")), ConfigError);
  CHECK_THROWS_AS(validate(parse_run_config("decoder: {max_passes: 1}\n")), ConfigError);
  CHECK_THROWS_AS(validate(parse_run_config("model: {d_model: 66}\n")), ConfigError);
  CHECK_THROWS_AS(validate(parse_run_config("model: {vocab_size: 200}\n")), ConfigError);
}

TEST_CASE("shipped example config equals the built-in defaults") {
  const auto file = load_run_config(std::string(PARDEC_SOURCE_DIR) + "/configs/default.yaml");
  const auto def = parse_run_config("");
  CHECK(file.model == def.model);
  CHECK(file.codec.response_length() == def.codec.response_length());
  CHECK(file.codec.action_token_base == def.codec.action_token_base);
  for (std::size_t d = 0; d < kActionDims; ++d) {
    CHECK(file.codec.ranges[d].lo == def.codec.ranges[d].lo);
    CHECK(file.codec.ranges[d].hi == def.codec.ranges[d].hi);
  }
  CHECK(file.bench.horizons == def.bench.horizons);
  CHECK(file.bench.prompt_seed == def.bench.prompt_seed);
  CHECK(file.decoder.init_seed == def.decoder.init_seed);
}
