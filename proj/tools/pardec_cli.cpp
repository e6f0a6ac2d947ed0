// pardec: parallel (Jacobi) decoding of action-token responses.
//
//   pardec init-model  --config run.yaml --out model.bin
//   pardec decode      --model model.bin --mode jacobi-causal --horizon 37 --prompt-seed 3
//   pardec verify      --model model.bin --trials 1000
//   pardec bench       --model model.bin --config run.yaml --out-dir results
//   pardec codec-fuzz  --samples 100000
//
// Exit codes:
//   0 success            4 I/O or integrity     7 codec framing / alien token
//   1 internal error     5 non-convergence      8 capacity
//   2 usage              6 oracle mismatch
//   3 config validation

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "pardec/action_codec.hpp"
#include "pardec/bench.hpp"
#include "pardec/config.hpp"
#include "pardec/decoder.hpp"
#include "pardec/json_io.hpp"
#include "pardec/prompts.hpp"
#include "pardec/weights_io.hpp"

namespace fs = std::filesystem;
using namespace pardec;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kValidation = 3,
  kIo = 4,
  kNonConvergence = 5,
  kOracleMismatch = 6,
  kCodec = 7,
  kCapacity = 8,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return kValidation;
    case ErrorKind::Capacity: return kCapacity;
    case ErrorKind::Io: return kIo;
    case ErrorKind::Codec: return kCodec;
    case ErrorKind::NonConvergence:
    case ErrorKind::CycleDetected: return kNonConvergence;
    case ErrorKind::OracleMismatch: return kOracleMismatch;
    case ErrorKind::Comparison:
    case ErrorKind::Range: return kInternal;
  }
  return kInternal;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

// Shared options: a config file plus per-flag overrides.
struct Common {
  std::string config;
  std::optional<std::size_t> prompt_length;
  std::optional<std::uint64_t> prompt_seed;
  std::optional<std::uint64_t> init_seed;
  std::optional<std::size_t> chunk_size;
};

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? parse_run_config("") : load_run_config(c.config);
  if (c.prompt_length) cfg.bench.prompt_length = *c.prompt_length;
  if (c.prompt_seed) cfg.bench.prompt_seed = *c.prompt_seed;
  if (c.init_seed) cfg.bench.init_seed = cfg.decoder.init_seed = *c.init_seed;
  if (c.chunk_size) cfg.codec.chunk_size = *c.chunk_size;
  return cfg;
}

/// Loads the weights and adopts their spec in place of the config's model section.
ToyModel load_into(RunConfig& cfg, const std::string& path) {
  ToyModel model = load_weights(path);
  cfg.model = model.spec();
  cfg.sync_codec();
  validate(cfg);
  return model;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "YAML run configuration");
  app->add_option("--prompt-length", c.prompt_length, "synthetic prompt length");
  app->add_option("--prompt-seed", c.prompt_seed, "prompt generator seed");
  app->add_option("--init-seed", c.init_seed, "Jacobi initialization seed");
  app->add_option("--chunk-size", c.chunk_size, "actions per chunk (m)");
}

int cmd_init_model(const Common& common, const std::string& out, std::optional<std::uint64_t> seed, bool zero) {
  RunConfig cfg = resolve(common);
  if (seed) cfg.model.seed = *seed;
  if (zero) cfg.model.init = WeightInit::Zero;
  cfg.sync_codec();
  validate(cfg);
  const ToyModel model = build_model(cfg.model);
  const fs::path path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto info = save_weights(model, path);
  std::cout << "wrote " << path.string() << " (" << info.bytes << " bytes)\n"
            << "file_checksum " << hex64(info.file_checksum) << "\n"
            << "weight_checksum " << hex64(info.weight_checksum) << "\n";
  return kOk;
}

struct DecodeArgs {
  std::string model;
  std::string mode = "jacobi-causal";
  std::optional<std::size_t> horizon;
  std::size_t prompt_index = 0;
  std::optional<std::size_t> max_passes;
  std::string init;
  std::string trace;
  bool trace_iterates = false;
  std::string out;
};

int cmd_decode(const Common& common, const DecodeArgs& a) {
  RunConfig cfg = resolve(common);
  const ToyModel model = load_into(cfg, a.model);
  const DecodeMode mode = parse_decode_mode(a.mode);
  if (a.max_passes) cfg.decoder.max_passes = *a.max_passes;
  if (!a.init.empty()) cfg.decoder.init = a.init == "constant" ? InitPolicy::Kind::ConstantToken
                                                               : InitPolicy::Kind::SeededUniformActionBlock;
  const std::size_t l = cfg.codec.response_length();
  const std::size_t horizon = a.horizon.value_or(cfg.decoder.horizon.value_or(l));
  DecoderConfig dc = decoder_config(cfg, mode, horizon);
  validate(dc);
  const TokenSequence prompt = synthetic_prompt(cfg.bench.prompt_seed, a.prompt_index, cfg.bench.prompt_length, cfg.codec);

  DecodeResult result;
  try {
    result = decode(model, prompt, dc);
  } catch (const DecodeError& e) {
    if (!a.trace.empty()) write_text(a.trace, trace_to_json(e.trace(), a.trace_iterates).dump(2) + "\n");
    std::cerr << "error: " << e.what() << "\n"
              << "passes_total " << e.trace().passes_total << "\n";
    return exit_code(e.kind());
  }
  if (!a.trace.empty()) write_text(a.trace, trace_to_json(result.trace, a.trace_iterates).dump(2) + "\n");

  json doc = {{"schema", "pardec.decode/1"}, {"tokens", result.tokens}, {"chunk", nullptr}, {"codec_error", nullptr}};
  int status = kOk;
  try {
    doc["chunk"] = chunk_to_json(decode_chunk(result.tokens, cfg.codec));
  } catch (const CodecError& e) {
    doc["codec_error"] = {{"message", e.what()},
                          {"position", e.position() ? json(*e.position()) : json(nullptr)}};
    status = kCodec;
  }
  const std::string text = doc.dump() + "\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_text(a.out, text);
  std::cerr << "mode " << to_string(mode) << " horizon " << (mode == DecodeMode::AR ? 1 : horizon) << "\n"
            << "passes_total " << result.trace.passes_total << "\n"
            << "passes_changing " << result.trace.passes_changing << "\n";
  if (status == kCodec) std::cerr << "error: " << doc["codec_error"]["message"].get<std::string>() << "\n";
  return status;
}

int cmd_verify(const Common& common, const std::string& model_path, long long trials, std::size_t seeds,
               std::vector<std::size_t> horizons) {
  if (trials <= 0) throw UsageError("--trials must be >= 1");
  if (seeds == 0) throw UsageError("--seeds-per-prompt must be >= 1");
  RunConfig cfg = resolve(common);
  if (!horizons.empty()) cfg.bench.horizons = horizons;
  const ToyModel model = load_into(cfg, model_path);
  const auto prompts = synthetic_prompts(cfg.bench.prompt_seed, static_cast<std::size_t>(trials),
                                         cfg.bench.prompt_length, cfg.codec);
  VerifyConfig vc;
  vc.horizons = cfg.bench.horizons;
  vc.trials = seeds;
  vc.init_seed = cfg.bench.init_seed;
  vc.response_length = cfg.codec.response_length();
  vc.action_token_base = cfg.codec.action_token_base;
  const VerifyReport rep = verify_oracle(model, prompts, vc);
  std::cout << "cases " << rep.cases << "\nmismatches " << rep.mismatches.size() << "\ninvariant_violations "
            << rep.invariant_violations.size() << "\n";
  for (const auto& m : rep.mismatches)
    std::cout << "mismatch prompt " << m.prompt_index << " horizon " << m.horizon << " seed " << m.seed
              << " first_slot " << m.first_differing_slot << "\n";
  for (const auto& v : rep.invariant_violations) std::cout << "violation " << v << "\n";
  return rep.mismatches.empty() && rep.invariant_violations.empty() ? kOk : kOracleMismatch;
}

struct BenchArgs {
  std::string model;
  std::string out_dir;
  std::optional<std::size_t> trials, warmup, prompt_count;
  std::vector<std::size_t> horizons;
  std::vector<std::string> modes;
};

int cmd_bench(const Common& common, const BenchArgs& a) {
  RunConfig cfg = resolve(common);
  if (a.trials) cfg.bench.trials = *a.trials;
  if (a.warmup) cfg.bench.warmup = *a.warmup;
  if (a.prompt_count) cfg.bench.prompt_count = *a.prompt_count;
  if (!a.horizons.empty()) cfg.bench.horizons = a.horizons;
  if (!a.modes.empty()) {
    cfg.bench.modes.clear();
    for (const auto& m : a.modes) cfg.bench.modes.push_back(parse_decode_mode(m));
  }
  if (!a.out_dir.empty()) cfg.output.dir = a.out_dir;
  if (cfg.bench.trials == 0) throw UsageError("--trials must be >= 1");
  const ToyModel model = load_into(cfg, a.model);
  const auto prompts = synthetic_prompts(cfg.bench.prompt_seed, cfg.bench.prompt_count, cfg.bench.prompt_length, cfg.codec);
  const BenchReport report = run_grid(model, prompts, bench_config(cfg));

  const fs::path base = cfg.output.dir / cfg.output.report_name;
  write_text(base.string() + ".json", report_to_json(report).dump(2) + "\n");
  if (cfg.output.csv) {
    write_text(base.string() + "_cells.csv", report_cells_csv(report));
    write_text(base.string() + "_speed.csv", report_speed_csv(report));
  }
  for (const auto& c : report.cells)
    std::cout << to_string(c.mode) << " n=" << (c.mode == DecodeMode::AR ? std::string("-") : std::to_string(c.horizon))
              << " mean_passes " << c.mean_passes << " reduction " << c.pass_reduction_vs_ar << " fixed "
              << c.mean_fixed_tokens_before_convergence << " preemptive " << c.mean_preemptive_fixed_tokens
              << " median_tps " << c.timing.tokens_per_second.median << "\n";
  std::cout << "report " << base.string() << ".json\n";
  return kOk;
}

int cmd_codec_fuzz(const Common& common, long long samples, std::uint64_t seed) {
  if (samples <= 0) throw UsageError("--samples must be >= 1");
  RunConfig cfg = resolve(common);
  validate(cfg.codec, cfg.model.vocab_size);
  const auto rep = codec_fuzz(cfg.codec, static_cast<std::size_t>(samples), seed);
  std::cout << "bijection " << rep.bijection_cases - rep.bijection_failures << "/" << rep.bijection_cases << "\n"
            << "roundtrip " << rep.samples - rep.roundtrip_failures << "/" << rep.samples
            << " max_error_over_half_bin " << rep.max_error_ratio << "\n"
            << "framing " << rep.framing_cases - rep.framing_failures << "/" << rep.framing_cases << "\n"
            << (rep.passed() ? "PASS" : "FAIL") << "\n";
  return rep.passed() ? kOk : kCodec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel (Jacobi) decoding for action-token models"};
  app.require_subcommand(1);
  Common common;

  auto* init = app.add_subcommand("init-model", "generate a seeded weight file and manifest");
  std::string init_out;
  std::optional<std::uint64_t> init_seed;
  bool init_zero = false;
  add_common(init, common);
  init->add_option("--out", init_out, "weight file path")->required();
  init->add_option("--seed", init_seed, "override model.seed");
  init->add_flag("--zero", init_zero, "all-zero weights (constant logits)");

  auto* dec = app.add_subcommand("decode", "decode one synthetic prompt and print the action chunk");
  DecodeArgs da;
  add_common(dec, common);
  dec->add_option("--model", da.model, "weight file")->required();
  dec->add_option("--mode", da.mode, "ar | jacobi-causal | jacobi-bidirectional");
  dec->add_option("--horizon", da.horizon, "tokens per Jacobi block (default l)");
  dec->add_option("--prompt-index", da.prompt_index, "which synthetic prompt");
  dec->add_option("--max-passes", da.max_passes, "per-block pass cap");
  dec->add_option("--init", da.init, "seeded | constant")->check(CLI::IsMember({"seeded", "constant"}));
  dec->add_option("--trace", da.trace, "write the decode trace JSON here");
  dec->add_flag("--trace-iterates", da.trace_iterates, "include every iterate in the trace");
  dec->add_option("--out", da.out, "write the decode JSON here instead of stdout");

  auto* ver = app.add_subcommand("verify", "check Jacobi-causal output against greedy AR");
  std::string ver_model;
  long long ver_trials = 1000;
  std::size_t ver_seeds = 1;
  std::vector<std::size_t> ver_horizons;
  add_common(ver, common);
  ver->add_option("--model", ver_model, "weight file")->required();
  ver->add_option("--trials", ver_trials, "number of seeded prompts");
  ver->add_option("--seeds-per-prompt", ver_seeds, "initializations per prompt and horizon");
  ver->add_option("--horizons", ver_horizons, "horizons to sweep")->delimiter(',');

  auto* ben = app.add_subcommand("bench", "run a modes x horizons grid and write reports");
  BenchArgs ba;
  add_common(ben, common);
  ben->add_option("--model", ba.model, "weight file")->required();
  ben->add_option("--out-dir", ba.out_dir, "report directory");
  ben->add_option("--trials", ba.trials, "measured decodes per prompt and cell");
  ben->add_option("--warmup", ba.warmup, "unmeasured decodes per prompt and cell");
  ben->add_option("--prompt-count", ba.prompt_count, "number of synthetic prompts");
  ben->add_option("--horizons", ba.horizons, "Jacobi horizons")->delimiter(',');
  ben->add_option("--modes", ba.modes, "jacobi-causal, jacobi-bidirectional")->delimiter(',');

  auto* fuzz = app.add_subcommand("codec-fuzz", "round-trip and bijection checks of the action codec");
  long long fuzz_samples = 100000;
  std::uint64_t fuzz_seed = 1;
  add_common(fuzz, common);
  fuzz->add_option("--samples", fuzz_samples, "random samples per dimension");
  fuzz->add_option("--seed", fuzz_seed, "fuzz seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*init) return cmd_init_model(common, init_out, init_seed, init_zero);
    if (*dec) return cmd_decode(common, da);
    if (*ver) return cmd_verify(common, ver_model, ver_trials, ver_seeds, ver_horizons);
    if (*ben) return cmd_bench(common, ba);
    if (*fuzz) return cmd_codec_fuzz(common, fuzz_samples, fuzz_seed);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
