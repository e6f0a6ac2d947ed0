#pragma once

// Run configuration: a YAML document with sections model, codec, decoder,
// bench and output. Every key is optional; precedence is
// built-in defaults < config file < command-line flags.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pardec/action_codec.hpp"
#include "pardec/bench.hpp"
#include "pardec/decoder.hpp"
#include "pardec/model.hpp"

namespace pardec {

struct DecoderDefaults {
  DecodeMode mode = DecodeMode::JacobiCausal;
  std::optional<std::size_t> horizon;  // defaults to l
  InitPolicy::Kind init = InitPolicy::Kind::SeededUniformActionBlock;
  std::uint64_t init_seed = 7;
  std::optional<TokenId> constant_token;  // defaults to the begin token
  std::optional<std::size_t> max_passes;
  std::optional<bool> cycle_detection;
};

struct GridParams {
  std::vector<DecodeMode> modes{DecodeMode::JacobiCausal};
  std::vector<std::size_t> horizons{7, 16, 37};
  std::size_t trials = 20;
  std::size_t warmup = 3;
  std::size_t prompt_count = 10;
  std::uint64_t prompt_seed = 2024;
  std::size_t prompt_length = 16;
  std::uint64_t init_seed = 7;
};

struct OutputParams {
  std::filesystem::path dir = ".";
  std::string report_name = "report";
  bool csv = true;
};

struct RunConfig {
  ModelSpec model{};
  CodecConfig codec = default_codec_config(512);
  bool codec_base_explicit = false;
  DecoderDefaults decoder{};
  GridParams bench{};
  OutputParams output{};

  /// Rebases the action block on the vocabulary unless it was set explicitly.
  void sync_codec();
};

/// Parses a YAML file. Throws IoError when unreadable, ConfigError on
/// malformed or unknown keys.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& yaml);

/// Cross-field checks: model and codec invariants, l + prompt length within
/// max_seq, every horizon within 1..l.
void validate(const RunConfig& cfg);

/// Decoder settings for one decode of the configured response length.
DecoderConfig decoder_config(const RunConfig& cfg, DecodeMode mode, std::size_t horizon);

BenchConfig bench_config(const RunConfig& cfg);

}  // namespace pardec
