#include "pardec/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace pardec {

namespace {

void check_keys(const YAML::Node& node, const std::string& section, std::set<std::string> allowed) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError("config: section '" + section + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& section) {
  if (!node || !node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError("config: bad value for '" + section + "." + key + "': " + e.what());
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, std::optional<T>& out, const std::string& section) {
  if (!node || !node[key]) return;
  T value{};
  read(node, key, value, section);
  out = value;
}

InitPolicy::Kind parse_init(const std::string& s) {
  if (s == "seeded" || s == "seeded-uniform-action-block") return InitPolicy::Kind::SeededUniformActionBlock;
  if (s == "constant") return InitPolicy::Kind::ConstantToken;
  throw ConfigError("config: unknown init policy '" + s + "' (expected seeded or constant)");
}

}  // namespace

void RunConfig::sync_codec() {
  if (!codec_base_explicit) codec.action_token_base = static_cast<TokenId>(model.vocab_size) - kBins;
}

RunConfig parse_run_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  if (!root || root.IsNull()) {
    cfg.sync_codec();
    return cfg;
  }
  if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");
  check_keys(root, "", {"model", "codec", "decoder", "bench", "output"});

  const auto model = root["model"];
  check_keys(model, "model", {"vocab_size", "d_model", "n_layers", "n_heads", "d_ff", "max_seq", "seed", "init"});
  read(model, "vocab_size", cfg.model.vocab_size, "model");
  read(model, "d_model", cfg.model.d_model, "model");
  read(model, "n_layers", cfg.model.n_layers, "model");
  read(model, "n_heads", cfg.model.n_heads, "model");
  read(model, "d_ff", cfg.model.d_ff, "model");
  read(model, "max_seq", cfg.model.max_seq, "model");
  read(model, "seed", cfg.model.seed, "model");
  std::string init = "uniform";
  read(model, "init", init, "model");
  if (init == "uniform")
    cfg.model.init = WeightInit::Uniform;
  else if (init == "zero")
    cfg.model.init = WeightInit::Zero;
  else
    throw ConfigError("config: model.init must be uniform or zero");

  const auto codec = root["codec"];
  check_keys(codec, "codec", {"chunk_size", "begin_token", "end_token", "action_token_base", "ranges"});
  read(codec, "chunk_size", cfg.codec.chunk_size, "codec");
  read(codec, "begin_token", cfg.codec.begin_token, "codec");
  read(codec, "end_token", cfg.codec.end_token, "codec");
  if (codec && codec["action_token_base"]) {
    read(codec, "action_token_base", cfg.codec.action_token_base, "codec");
    cfg.codec_base_explicit = true;
  }
  if (codec && codec["ranges"]) {
    std::vector<std::vector<double>> ranges;
    read(codec, "ranges", ranges, "codec");
    if (ranges.size() != kActionDims) throw ConfigError("config: codec.ranges needs 7 [lo, hi] pairs");
    for (std::size_t d = 0; d < kActionDims; ++d) {
      if (ranges[d].size() != 2) throw ConfigError("config: codec.ranges entries must be [lo, hi]");
      cfg.codec.ranges[d] = Range{ranges[d][0], ranges[d][1]};
    }
  }

  const auto dec = root["decoder"];
  check_keys(dec, "decoder", {"mode", "horizon", "init", "init_seed", "constant_token", "max_passes", "cycle_detection"});
  if (dec && dec["mode"]) {
    std::string mode;
    read(dec, "mode", mode, "decoder");
    cfg.decoder.mode = parse_decode_mode(mode);
  }
  read(dec, "horizon", cfg.decoder.horizon, "decoder");
  if (dec && dec["init"]) {
    std::string kind;
    read(dec, "init", kind, "decoder");
    cfg.decoder.init = parse_init(kind);
  }
  read(dec, "init_seed", cfg.decoder.init_seed, "decoder");
  read(dec, "constant_token", cfg.decoder.constant_token, "decoder");
  read(dec, "max_passes", cfg.decoder.max_passes, "decoder");
  read(dec, "cycle_detection", cfg.decoder.cycle_detection, "decoder");

  const auto bench = root["bench"];
  check_keys(bench, "bench",
             {"modes", "horizons", "trials", "warmup", "prompt_count", "prompt_seed", "prompt_length", "init_seed"});
  if (bench && bench["modes"]) {
    std::vector<std::string> modes;
    read(bench, "modes", modes, "bench");
    cfg.bench.modes.clear();
    for (const auto& m : modes) cfg.bench.modes.push_back(parse_decode_mode(m));
  }
  read(bench, "horizons", cfg.bench.horizons, "bench");
  read(bench, "trials", cfg.bench.trials, "bench");
  read(bench, "warmup", cfg.bench.warmup, "bench");
  read(bench, "prompt_count", cfg.bench.prompt_count, "bench");
  read(bench, "prompt_seed", cfg.bench.prompt_seed, "bench");
  read(bench, "prompt_length", cfg.bench.prompt_length, "bench");
  read(bench, "init_seed", cfg.bench.init_seed, "bench");

  const auto out = root["output"];
  check_keys(out, "output", {"dir", "report_name", "csv"});
  std::string dir = cfg.output.dir.string();
  read(out, "dir", dir, "output");
  cfg.output.dir = dir;
  read(out, "report_name", cfg.output.report_name, "output");
  read(out, "csv", cfg.output.csv, "output");

  cfg.sync_codec();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

void validate(const RunConfig& cfg) {
  validate(cfg.model);
  validate(cfg.codec, cfg.model.vocab_size);
  const std::size_t l = cfg.codec.response_length();
  if (cfg.bench.prompt_length == 0) throw ConfigError("config: bench.prompt_length must be >= 1");
  if (l + cfg.bench.prompt_length > cfg.model.max_seq)
    throw ConfigError("config: response length l = " + std::to_string(l) + " plus prompt length " +
                      std::to_string(cfg.bench.prompt_length) + " exceeds model.max_seq " +
                      std::to_string(cfg.model.max_seq));
  for (std::size_t n : cfg.bench.horizons)
    if (n < 1 || n > l) throw ConfigError("config: bench horizon " + std::to_string(n) + " outside 1.." + std::to_string(l));
  if (cfg.decoder.horizon && (*cfg.decoder.horizon < 1 || *cfg.decoder.horizon > l))
    throw ConfigError("config: decoder.horizon outside 1.." + std::to_string(l));
  if (cfg.decoder.max_passes && *cfg.decoder.max_passes < 2) throw ConfigError("config: decoder.max_passes must be >= 2");
  if (cfg.bench.trials < 1) throw ConfigError("config: bench.trials must be >= 1");
  if (cfg.bench.prompt_count < 1) throw ConfigError("config: bench.prompt_count must be >= 1");
}

DecoderConfig decoder_config(const RunConfig& cfg, DecodeMode mode, std::size_t horizon) {
  DecoderConfig dc;
  dc.mode = mode;
  dc.total_length = cfg.codec.response_length();
  dc.horizon = horizon;
  if (cfg.decoder.init == InitPolicy::Kind::ConstantToken)
    dc.init = InitPolicy::constant(cfg.decoder.constant_token.value_or(cfg.codec.begin_token));
  else
    dc.init = InitPolicy::uniform_action_block(cfg.decoder.init_seed, cfg.codec.action_token_base);
  dc.max_passes = cfg.decoder.max_passes;
  dc.cycle_detection = cfg.decoder.cycle_detection;
  return dc;
}

BenchConfig bench_config(const RunConfig& cfg) {
  BenchConfig bc;
  bc.modes = cfg.bench.modes;
  bc.horizons = cfg.bench.horizons;
  bc.trials = cfg.bench.trials;
  bc.warmup = cfg.bench.warmup;
  bc.init_seed = cfg.bench.init_seed;
  bc.init_kind = cfg.decoder.init;
  bc.constant_token = cfg.decoder.constant_token.value_or(cfg.codec.begin_token);
  bc.max_passes = cfg.decoder.max_passes;
  bc.codec = cfg.codec;
  return bc;
}

}  // namespace pardec
