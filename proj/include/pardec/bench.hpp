#pragma once

// Experiment grids over decode modes x horizons x seeds.
//
// Pass counts are the primary metric; wall-clock numbers are reported only.
// Every Jacobi-causal trial is checked token-for-token against the cached
// greedy AR output of its prompt, and any mismatch aborts the grid.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pardec/action_codec.hpp"
#include "pardec/decoder.hpp"
#include "pardec/model.hpp"

namespace pardec {

struct TrialRecord {
  DecodeMode mode = DecodeMode::AR;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::size_t prompt_index = 0;
  std::size_t response_length = 0;  // l
  std::size_t chunk_size = 0;       // m
  std::size_t blocks = 0;
  std::size_t passes_total = 0;
  std::size_t passes_changing = 0;
  std::int64_t wall_nanos = 0;      // steady_clock
  double tokens_per_second = 0.0;   // l / wall seconds
  double frequency_hz = 0.0;        // m / wall seconds
  double mean_fixed_tokens_at_first_pass = 0.0;
  std::size_t fixed_tokens_before_convergence = 0;
  std::size_t preemptive_fixed_tokens = 0;
  bool converged = false;
  std::optional<bool> matched_oracle;  // causal Jacobi only
};

/// Fills the derived rate fields from wall_nanos.
void set_timing(TrialRecord& record, std::int64_t wall_nanos);

struct PassReduction {
  double pass_ratio = 0.0;  // ar.passes_total / jacobi.passes_total
  double wall_ratio = 0.0;  // ar.wall_nanos / jacobi.wall_nanos (0 when untimed)
};

/// Throws a Comparison error when the two records cover different lengths.
PassReduction pass_reduction(const TrialRecord& ar, const TrialRecord& jacobi);

struct Summary {
  double min = 0.0, mean = 0.0, median = 0.0, max = 0.0;
};
Summary summarize(std::vector<double> values);

struct CellTiming {
  Summary tokens_per_second;
  Summary frequency_hz;
  double median_wall_nanos = 0.0;
  double wall_ratio_vs_ar = 0.0;  // median AR wall / median cell wall
};

struct CellReport {
  DecodeMode mode = DecodeMode::AR;
  std::size_t horizon = 0;
  std::size_t blocks = 0;
  std::size_t trials = 0;
  std::size_t converged = 0;
  std::size_t nonconverged = 0;
  std::size_t cycles = 0;
  double mean_passes = 0.0;
  double mean_passes_changing = 0.0;
  double mean_passes_per_token = 0.0;
  double mean_fixed_tokens_at_first_pass = 0.0;
  double mean_fixed_tokens_before_convergence = 0.0;
  double mean_preemptive_fixed_tokens = 0.0;
  std::optional<double> oracle_match_rate;   // causal Jacobi and AR
  std::optional<double> ar_agreement_rate;   // bidirectional, informational
  double pass_reduction_vs_ar = 0.0;
  CellTiming timing;
};

struct TrendReport {
  DecodeMode mode = DecodeMode::JacobiCausal;
  std::vector<std::size_t> horizons;
  bool fixed_tokens_nondecreasing = false;
  bool preemptive_nondecreasing = false;
  bool passes_per_token_nonincreasing = false;
  bool inversion_flagged = false;  // passes-per-token rose with the horizon somewhere
};

struct BenchConfig {
  std::vector<DecodeMode> modes{DecodeMode::JacobiCausal};
  std::vector<std::size_t> horizons{7, 16, 37};
  std::size_t trials = 20;
  std::size_t warmup = 3;
  std::uint64_t init_seed = 7;
  InitPolicy::Kind init_kind = InitPolicy::Kind::SeededUniformActionBlock;
  TokenId constant_token = 0;
  std::optional<std::size_t> max_passes;
  CodecConfig codec{};
};

struct BenchMetadata {
  std::string model_checksum;
  ModelSpec model_spec;
  CodecConfig codec;
  std::size_t trials = 0;
  std::size_t warmup = 0;
  std::size_t prompt_count = 0;
  std::uint64_t init_seed = 0;
  std::string init_kind;
};

struct BenchReport {
  static constexpr int kSchemaVersion = 1;
  BenchMetadata metadata;
  std::vector<CellReport> cells;  // AR baseline first
  std::vector<TrendReport> trends;
};

/// Init seed of trial `trial` on prompt `prompt`.
std::uint64_t trial_seed(std::uint64_t base, std::size_t prompt, std::size_t trial);

class OracleMismatchError : public Error {
 public:
  OracleMismatchError(std::uint64_t seed, std::size_t prompt, std::size_t horizon)
      : Error(ErrorKind::OracleMismatch, "bench: Jacobi-causal output differs from AR (seed " + std::to_string(seed) +
                                             ", prompt " + std::to_string(prompt) + ", horizon " +
                                             std::to_string(horizon) + ")"),
        seed_(seed), prompt_(prompt), horizon_(horizon) {}
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t prompt() const noexcept { return prompt_; }
  std::size_t horizon() const noexcept { return horizon_; }

 private:
  std::uint64_t seed_;
  std::size_t prompt_;
  std::size_t horizon_;
};

BenchReport run_grid(const ToyModel& model, const std::vector<TokenSequence>& prompts, const BenchConfig& cfg);

/// Same grid, also returning every measured trial.
BenchReport run_grid(const ToyModel& model, const std::vector<TokenSequence>& prompts, const BenchConfig& cfg,
                     std::vector<TrialRecord>& trials_out);

struct Mismatch {
  std::size_t prompt_index = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  TokenSequence ar;
  TokenSequence jacobi;
  std::size_t first_differing_slot = 0;
};

struct VerifyConfig {
  DecodeMode mode = DecodeMode::JacobiCausal;
  std::vector<std::size_t> horizons{7, 16, 37};
  std::size_t trials = 1;  // init seeds per prompt and horizon
  std::uint64_t init_seed = 7;
  std::size_t response_length = 37;
  TokenId action_token_base = 0;
  std::size_t threads = 0;  // 0: hardware concurrency
};

struct VerifyReport {
  std::vector<Mismatch> mismatches;
  std::vector<std::string> invariant_violations;
  std::size_t cases = 0;
};

/// Exhaustive causal equivalence sweep. Mismatches and trace-invariant
/// violations are returned as data. Refuses (ConfigError) anything but
/// Jacobi-causal mode.
VerifyReport verify_oracle(const ToyModel& model, const std::vector<TokenSequence>& prompts, const VerifyConfig& cfg);

/// Prefix fixing, per-block pass bounds, convergence and the total-pass
/// bound for a Jacobi-causal trace; one message per violation.
std::vector<std::string> check_causal_trace(const DecodeTrace& trace);

}  // namespace pardec
