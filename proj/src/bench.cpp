#include "pardec/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <mutex>
#include <numeric>
#include <tuple>
#include <thread>

#include "pardec/weights_io.hpp"

namespace pardec {

namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
std::int64_t time_nanos(Fn&& fn) {
  const auto t0 = Clock::now();
  fn();
  const auto t1 = Clock::now();
  return std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

TrialRecord record_from(const DecodeResult& result, DecodeMode mode, std::size_t horizon, std::uint64_t seed,
                        std::size_t prompt, const CodecConfig& codec) {
  TrialRecord r;
  r.mode = mode;
  r.horizon = horizon;
  r.seed = seed;
  r.prompt_index = prompt;
  r.response_length = result.trace.response_length;
  r.chunk_size = codec.chunk_size;
  r.blocks = result.trace.blocks.size();
  r.passes_total = result.trace.passes_total;
  r.passes_changing = result.trace.passes_changing;
  r.converged = result.trace.converged;
  if (mode != DecodeMode::AR) {
    r.mean_fixed_tokens_at_first_pass = fixed_tokens_at_first_pass(result.trace);
    r.fixed_tokens_before_convergence = fixed_tokens_before_convergence(result.trace);
    r.preemptive_fixed_tokens = preemptive_fixed_tokens(result.trace);
  }
  return r;
}

InitPolicy policy_for(const BenchConfig& cfg, std::uint64_t seed) {
  if (cfg.init_kind == InitPolicy::Kind::ConstantToken) return InitPolicy::constant(cfg.constant_token);
  return InitPolicy::uniform_action_block(seed, cfg.codec.action_token_base);
}

CellReport aggregate(DecodeMode mode, std::size_t horizon, const std::vector<TrialRecord>& trials,
                     std::size_t nonconverged, std::size_t cycles, std::size_t length) {
  CellReport c;
  c.mode = mode;
  c.horizon = horizon;
  c.blocks = block_sizes(length, horizon).size();
  c.trials = trials.size();
  c.nonconverged = nonconverged;
  c.cycles = cycles;
  std::vector<double> passes, changing, first, before, preemptive, tps, hz, wall;
  std::size_t matched = 0, judged = 0;
  for (const auto& t : trials) {
    passes.push_back(static_cast<double>(t.passes_total));
    if (!t.converged) continue;
    ++c.converged;
    changing.push_back(static_cast<double>(t.passes_changing));
    first.push_back(t.mean_fixed_tokens_at_first_pass);
    before.push_back(static_cast<double>(t.fixed_tokens_before_convergence));
    preemptive.push_back(static_cast<double>(t.preemptive_fixed_tokens));
    tps.push_back(t.tokens_per_second);
    hz.push_back(t.frequency_hz);
    wall.push_back(static_cast<double>(t.wall_nanos));
    if (t.matched_oracle) {
      ++judged;
      matched += *t.matched_oracle;
    }
  }
  c.mean_passes = mean_of(passes);
  c.mean_passes_changing = mean_of(changing);
  c.mean_passes_per_token = c.mean_passes / static_cast<double>(length);
  c.mean_fixed_tokens_at_first_pass = mean_of(first);
  c.mean_fixed_tokens_before_convergence = mean_of(before);
  c.mean_preemptive_fixed_tokens = mean_of(preemptive);
  if (judged > 0) {
    const double rate = static_cast<double>(matched) / static_cast<double>(judged);
    if (mode == DecodeMode::JacobiBidirectional)
      c.ar_agreement_rate = rate;
    else
      c.oracle_match_rate = rate;
  }
  c.timing.tokens_per_second = summarize(tps);
  c.timing.frequency_hz = summarize(hz);
  c.timing.median_wall_nanos = summarize(wall).median;
  return c;
}

std::vector<TrendReport> trends_of(const std::vector<CellReport>& cells) {
  std::vector<TrendReport> out;
  for (DecodeMode mode : {DecodeMode::JacobiCausal, DecodeMode::JacobiBidirectional}) {
    std::vector<const CellReport*> row;
    for (const auto& c : cells)
      if (c.mode == mode) row.push_back(&c);
    if (row.empty()) continue;
    std::stable_sort(row.begin(), row.end(), [](auto* a, auto* b) { return a->horizon < b->horizon; });
    TrendReport t;
    t.mode = mode;
    t.fixed_tokens_nondecreasing = t.preemptive_nondecreasing = t.passes_per_token_nonincreasing = true;
    for (std::size_t i = 0; i < row.size(); ++i) {
      t.horizons.push_back(row[i]->horizon);
      if (i == 0) continue;
      const auto& prev = *row[i - 1];
      const auto& cur = *row[i];
      t.fixed_tokens_nondecreasing &= cur.mean_fixed_tokens_before_convergence >= prev.mean_fixed_tokens_before_convergence;
      t.preemptive_nondecreasing &= cur.mean_preemptive_fixed_tokens >= prev.mean_preemptive_fixed_tokens;
      t.passes_per_token_nonincreasing &= cur.mean_passes_per_token <= prev.mean_passes_per_token;
    }
    t.inversion_flagged = !t.passes_per_token_nonincreasing;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

void set_timing(TrialRecord& record, std::int64_t wall_nanos) {
  record.wall_nanos = std::max<std::int64_t>(wall_nanos, 1);
  const double seconds = static_cast<double>(record.wall_nanos) * 1e-9;
  record.tokens_per_second = static_cast<double>(record.response_length) / seconds;
  record.frequency_hz = static_cast<double>(record.chunk_size) / seconds;
}

PassReduction pass_reduction(const TrialRecord& ar, const TrialRecord& jacobi) {
  if (ar.response_length != jacobi.response_length)
    throw Error(ErrorKind::Comparison, "bench: cannot compare trials of length " + std::to_string(ar.response_length) +
                                           " and " + std::to_string(jacobi.response_length));
  if (jacobi.passes_total == 0) throw Error(ErrorKind::Comparison, "bench: Jacobi trial has no passes");
  PassReduction out;
  out.pass_ratio = static_cast<double>(ar.passes_total) / static_cast<double>(jacobi.passes_total);
  if (ar.wall_nanos > 0 && jacobi.wall_nanos > 0)
    out.wall_ratio = static_cast<double>(ar.wall_nanos) / static_cast<double>(jacobi.wall_nanos);
  return out;
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.mean = mean_of(values);
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t prompt, std::size_t trial) {
  return rng::stream_key(base, prompt, rng::splitmix64(trial));
}

BenchReport run_grid(const ToyModel& model, const std::vector<TokenSequence>& prompts, const BenchConfig& cfg) {
  std::vector<TrialRecord> ignored;
  return run_grid(model, prompts, cfg, ignored);
}

BenchReport run_grid(const ToyModel& model, const std::vector<TokenSequence>& prompts, const BenchConfig& cfg,
                     std::vector<TrialRecord>& trials_out) {
  validate(cfg.codec, model.spec().vocab_size);
  const std::size_t length = cfg.codec.response_length();
  if (cfg.trials < 1) throw ConfigError("bench: trials must be >= 1");
  if (prompts.empty()) throw ConfigError("bench: prompt set is empty");
  for (std::size_t n : cfg.horizons)
    if (n < 1 || n > length)
      throw ConfigError("bench: horizon " + std::to_string(n) + " outside 1.." + std::to_string(length));

  BenchReport report;
  auto& meta = report.metadata;
  meta.model_checksum = hex64(weight_checksum(model));
  meta.model_spec = model.spec();
  meta.codec = cfg.codec;
  meta.trials = cfg.trials;
  meta.warmup = cfg.warmup;
  meta.prompt_count = prompts.size();
  meta.init_seed = cfg.init_seed;
  meta.init_kind = cfg.init_kind == InitPolicy::Kind::ConstantToken ? "constant" : "seeded-uniform-action-block";

  // AR baseline doubles as the oracle.
  std::vector<TokenSequence> oracle;
  std::vector<TrialRecord> ar_trials;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    for (std::size_t w = 0; w < cfg.warmup; ++w) (void)decode_ar(model, prompts[p], length);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      DecodeResult result;
      const auto nanos = time_nanos([&] { result = decode_ar(model, prompts[p], length); });
      if (t == 0) oracle.push_back(result.tokens);
      auto rec = record_from(result, DecodeMode::AR, 1, 0, p, cfg.codec);
      rec.matched_oracle = result.tokens == oracle[p];
      set_timing(rec, nanos);
      ar_trials.push_back(rec);
    }
  }
  CellReport ar_cell = aggregate(DecodeMode::AR, 1, ar_trials, 0, 0, length);
  ar_cell.pass_reduction_vs_ar = 1.0;
  ar_cell.timing.wall_ratio_vs_ar = 1.0;
  report.cells.push_back(ar_cell);
  trials_out.insert(trials_out.end(), ar_trials.begin(), ar_trials.end());

  for (DecodeMode mode : cfg.modes) {
    if (mode == DecodeMode::AR) continue;
    for (std::size_t n : cfg.horizons) {
      DecoderConfig dc;
      dc.mode = mode;
      dc.horizon = n;
      dc.total_length = length;
      dc.max_passes = cfg.max_passes;
      std::vector<TrialRecord> cell;
      std::size_t nonconverged = 0, cycles = 0;
      for (std::size_t p = 0; p < prompts.size(); ++p) {
        dc.init = policy_for(cfg, trial_seed(cfg.init_seed, p, 0));
        for (std::size_t w = 0; w < cfg.warmup; ++w) {
          try {
            (void)decode(model, prompts[p], dc);
          } catch (const DecodeError&) {
            if (mode == DecodeMode::JacobiCausal) throw;
          }
        }
        for (std::size_t t = 0; t < cfg.trials; ++t) {
          const std::uint64_t seed = trial_seed(cfg.init_seed, p, t);
          dc.init = policy_for(cfg, seed);
          DecodeResult result;
          std::int64_t nanos = 0;
          try {
            nanos = time_nanos([&] { result = decode(model, prompts[p], dc); });
          } catch (const DecodeError& e) {
            if (mode == DecodeMode::JacobiCausal) throw;
            result.trace = e.trace();
            ++nonconverged;
            cycles += e.kind() == ErrorKind::CycleDetected;
          }
          auto rec = record_from(result, mode, n, seed, p, cfg.codec);
          if (rec.converged) {
            rec.matched_oracle = result.tokens == oracle[p];
            if (mode == DecodeMode::JacobiCausal && !*rec.matched_oracle) throw OracleMismatchError(seed, p, n);
            set_timing(rec, nanos);
          }
          cell.push_back(rec);
        }
      }
      auto c = aggregate(mode, n, cell, nonconverged, cycles, length);
      if (c.mean_passes > 0) c.pass_reduction_vs_ar = ar_cell.mean_passes / c.mean_passes;
      if (c.timing.median_wall_nanos > 0)
        c.timing.wall_ratio_vs_ar = ar_cell.timing.median_wall_nanos / c.timing.median_wall_nanos;
      report.cells.push_back(std::move(c));
      trials_out.insert(trials_out.end(), cell.begin(), cell.end());
    }
  }

  for (const auto& c : report.cells)
    if (c.mode == DecodeMode::JacobiCausal && c.oracle_match_rate.value_or(0.0) != 1.0)
      throw Error(ErrorKind::OracleMismatch, "bench: causal cell at horizon " + std::to_string(c.horizon) +
                                                 " has oracle match rate below 1");
  report.trends = trends_of(report.cells);
  return report;
}

std::vector<std::string> check_causal_trace(const DecodeTrace& trace) {
  std::vector<std::string> errors;
  const auto fail = [&](const std::string& what) { errors.push_back(what); };
  if (trace.mode != DecodeMode::JacobiCausal) {
    fail("trace is not a Jacobi-causal trace");
    return errors;
  }
  if (!trace.converged) fail("trace did not converge");
  for (std::size_t b = 0; b < trace.blocks.size(); ++b) {
    const auto& block = trace.blocks[b];
    const std::string tag = "block " + std::to_string(b) + ": ";
    if (block.size() > trace.horizon) fail(tag + "larger than the horizon");
    if (block.passes_changing > block.size()) fail(tag + "passes_changing exceeds block size");
    if (block.passes > block.size() + 1) fail(tag + "passes exceed block size + 1");
    if (block.iterates.size() != block.passes + 1) fail(tag + "iterate count does not match passes");
    if (block.converged && block.iterates.size() >= 2 &&
        block.iterates.back() != block.iterates[block.iterates.size() - 2])
      fail(tag + "missing fixed-point certificate");
    if (block.fixed_token_counts.back() != block.size()) fail(tag + "final fixed-token count is not the block size");
    const auto& final_iterate = block.iterates.back();
    std::size_t prev_prefix = 0;
    for (std::size_t j = 0; j < block.iterates.size(); ++j) {
      const std::size_t prefix = matching_prefix(block.iterates[j], final_iterate);
      if (prefix < std::min(j, block.size()))
        fail(tag + "prefix fixing violated after pass " + std::to_string(j));
      if (prefix < prev_prefix) fail(tag + "matching prefix shrank at pass " + std::to_string(j));
      prev_prefix = prefix;
    }
  }
  if (trace.passes_total > trace.response_length + trace.blocks.size())
    fail("total passes exceed l + number of blocks");
  return errors;
}

VerifyReport verify_oracle(const ToyModel& model, const std::vector<TokenSequence>& prompts, const VerifyConfig& cfg) {
  if (cfg.mode != DecodeMode::JacobiCausal)
    throw ConfigError("verify: only jacobi-causal decoding carries an AR-equivalence guarantee");
  if (cfg.trials < 1) throw ConfigError("verify: trials must be >= 1");
  for (std::size_t n : cfg.horizons)
    if (n < 1 || n > cfg.response_length)
      throw ConfigError("verify: horizon " + std::to_string(n) + " outside 1.." + std::to_string(cfg.response_length));

  VerifyReport report;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t p = next++; p < prompts.size(); p = next++) {
      const TokenSequence ar = decode_ar(model, prompts[p], cfg.response_length).tokens;
      std::vector<Mismatch> local_mismatch;
      std::vector<std::string> local_violations;
      std::size_t cases = 0;
      for (std::size_t n : cfg.horizons) {
        for (std::size_t t = 0; t < cfg.trials; ++t) {
          DecoderConfig dc;
          dc.mode = DecodeMode::JacobiCausal;
          dc.horizon = n;
          dc.total_length = cfg.response_length;
          const std::uint64_t seed = trial_seed(cfg.init_seed, p, t);
          dc.init = InitPolicy::uniform_action_block(seed, cfg.action_token_base);
          ++cases;
          DecodeResult result;
          try {
            result = decode(model, prompts[p], dc);
          } catch (const DecodeError& e) {
            result.trace = e.trace();
            result.tokens = e.trace().output();
          }
          for (const auto& v : check_causal_trace(result.trace))
            local_violations.push_back("prompt " + std::to_string(p) + " horizon " + std::to_string(n) + ": " + v);
          if (result.tokens != ar) {
            Mismatch m{p, n, seed, ar, result.tokens, matching_prefix(ar, result.tokens)};
            local_mismatch.push_back(std::move(m));
          }
        }
      }
      std::lock_guard lock(mu);
      report.cases += cases;
      report.mismatches.insert(report.mismatches.end(), local_mismatch.begin(), local_mismatch.end());
      report.invariant_violations.insert(report.invariant_violations.end(), local_violations.begin(),
                                         local_violations.end());
    }
  };
  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, prompts.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  std::sort(report.mismatches.begin(), report.mismatches.end(), [](const Mismatch& a, const Mismatch& b) {
    return std::tie(a.prompt_index, a.horizon, a.seed) < std::tie(b.prompt_index, b.horizon, b.seed);
  });
  std::sort(report.invariant_violations.begin(), report.invariant_violations.end());
  return report;
}

}  // namespace pardec
