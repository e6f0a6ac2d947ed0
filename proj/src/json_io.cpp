#include "pardec/json_io.hpp"

#include <sstream>

namespace pardec {

namespace {

json summary_json(const Summary& s) {
  return {{"min", s.min}, {"mean", s.mean}, {"median", s.median}, {"max", s.max}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string horizon_label(const CellReport& c) {
  return c.mode == DecodeMode::AR ? "ar" : std::to_string(c.horizon);
}

}  // namespace

json to_json(const ModelSpec& s) {
  return {{"vocab_size", s.vocab_size}, {"d_model", s.d_model}, {"n_layers", s.n_layers},
          {"n_heads", s.n_heads},       {"d_ff", s.d_ff},       {"max_seq", s.max_seq},
          {"seed", s.seed},             {"init", s.init == WeightInit::Zero ? "zero" : "uniform"}};
}

json to_json(const CodecConfig& c) {
  json ranges = json::array();
  for (const auto& r : c.ranges) ranges.push_back({r.lo, r.hi});
  return {{"ranges", ranges},
          {"n_bins", kBins},
          {"action_token_base", c.action_token_base},
          {"begin_token", c.begin_token},
          {"end_token", c.end_token},
          {"chunk_size", c.chunk_size},
          {"response_length", c.response_length()}};
}

json chunk_to_json(const ActionChunk& chunk) {
  json rows = json::array();
  for (Eigen::Index a = 0; a < chunk.rows(); ++a) {
    json row = json::array();
    for (Eigen::Index d = 0; d < chunk.cols(); ++d) row.push_back(chunk(a, d));
    rows.push_back(std::move(row));
  }
  return rows;
}

ActionChunk chunk_from_json(const json& rows) {
  if (!rows.is_array()) throw CodecError(CodecError::Reason::Framing, "chunk json: expected an array of rows");
  ActionChunk chunk(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kActionDims));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    const auto& row = rows[a];
    if (!row.is_array() || row.size() != kActionDims)
      throw CodecError(CodecError::Reason::Framing, "chunk json: row " + std::to_string(a) + " needs 7 numbers");
    for (std::size_t d = 0; d < kActionDims; ++d) {
      if (!row[d].is_number())
        throw CodecError(CodecError::Reason::Framing, "chunk json: row " + std::to_string(a) + " has a non-number");
      chunk(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(d)) = row[d].get<double>();
    }
  }
  return chunk;
}

json trace_to_json(const DecodeTrace& trace, bool include_iterates) {
  json blocks = json::array();
  for (const auto& b : trace.blocks) {
    json block = {{"start", b.start},
                  {"end", b.end},
                  {"passes", b.passes},
                  {"passes_changing", b.passes_changing},
                  {"converged", b.converged},
                  {"changed_positions", b.changed_positions},
                  {"fixed_token_counts", b.fixed_token_counts}};
    if (include_iterates) block["iterates"] = b.iterates;
    blocks.push_back(std::move(block));
  }
  json boundaries = json::array();
  for (const auto& [s, e] : trace.block_boundaries()) boundaries.push_back({s, e});
  return {{"schema", "pardec.trace/1"},
          {"mode", to_string(trace.mode)},
          {"response_length", trace.response_length},
          {"horizon", trace.horizon},
          {"passes_total", trace.passes_total},
          {"passes_changing", trace.passes_changing},
          {"converged", trace.converged},
          {"block_boundaries", boundaries},
          {"output", trace.output()},
          {"blocks", blocks}};
}

json report_to_json(const BenchReport& report) {
  const auto& m = report.metadata;
  json cells = json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"mode", to_string(c.mode)},
                     {"horizon", c.horizon},
                     {"blocks", c.blocks},
                     {"trials", c.trials},
                     {"converged", c.converged},
                     {"nonconverged", c.nonconverged},
                     {"cycles", c.cycles},
                     {"mean_passes", c.mean_passes},
                     {"mean_passes_changing", c.mean_passes_changing},
                     {"mean_passes_per_token", c.mean_passes_per_token},
                     {"mean_fixed_tokens_at_first_pass", c.mean_fixed_tokens_at_first_pass},
                     {"mean_fixed_tokens_before_convergence", c.mean_fixed_tokens_before_convergence},
                     {"mean_preemptive_fixed_tokens", c.mean_preemptive_fixed_tokens},
                     {"oracle_match_rate", optional_json(c.oracle_match_rate)},
                     {"ar_agreement_rate", optional_json(c.ar_agreement_rate)},
                     {"pass_reduction_vs_ar", c.pass_reduction_vs_ar},
                     {"timing",
                      {{"tokens_per_second", summary_json(c.timing.tokens_per_second)},
                       {"frequency_hz", summary_json(c.timing.frequency_hz)},
                       {"median_wall_nanos", c.timing.median_wall_nanos},
                       {"wall_ratio_vs_ar", c.timing.wall_ratio_vs_ar}}}});
  }
  json trends = json::array();
  for (const auto& t : report.trends)
    trends.push_back({{"mode", to_string(t.mode)},
                      {"horizons", t.horizons},
                      {"fixed_tokens_nondecreasing", t.fixed_tokens_nondecreasing},
                      {"preemptive_nondecreasing", t.preemptive_nondecreasing},
                      {"passes_per_token_nonincreasing", t.passes_per_token_nonincreasing},
                      {"inversion_flagged", t.inversion_flagged}});
  return {{"schema", "pardec.report/1"},
          {"schema_version", BenchReport::kSchemaVersion},
          {"metadata",
           {{"model_checksum", m.model_checksum},
            {"model", to_json(m.model_spec)},
            {"codec", to_json(m.codec)},
            {"trials", m.trials},
            {"warmup", m.warmup},
            {"prompt_count", m.prompt_count},
            {"init_seed", m.init_seed},
            {"init", m.init_kind}}},
          {"cells", cells},
          {"trends", trends}};
}

json strip_timing(json report) {
  if (report.is_object()) {
    report.erase("timing");
    for (auto& [key, value] : report.items()) value = strip_timing(std::move(value));
  } else if (report.is_array()) {
    for (auto& value : report) value = strip_timing(std::move(value));
  }
  return report;
}

std::string report_cells_csv(const BenchReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "mode,horizon,blocks,trials,converged,nonconverged,mean_passes,mean_passes_changing,"
         "mean_passes_per_token,mean_fixed_tokens_at_first_pass,mean_fixed_tokens_before_convergence,"
         "mean_preemptive_fixed_tokens,oracle_match_rate,pass_reduction_vs_ar,tps_min,tps_mean,tps_median,tps_max,"
         "hz_median,wall_ratio_vs_ar\n";
  for (const auto& c : report.cells) {
    out << to_string(c.mode) << ',' << horizon_label(c) << ',' << c.blocks << ',' << c.trials << ',' << c.converged
        << ',' << c.nonconverged << ',' << c.mean_passes << ',' << c.mean_passes_changing << ','
        << c.mean_passes_per_token << ',' << c.mean_fixed_tokens_at_first_pass << ','
        << c.mean_fixed_tokens_before_convergence << ',' << c.mean_preemptive_fixed_tokens << ',';
    if (c.oracle_match_rate) out << *c.oracle_match_rate;
    out << ',' << c.pass_reduction_vs_ar << ',' << c.timing.tokens_per_second.min << ','
        << c.timing.tokens_per_second.mean << ',' << c.timing.tokens_per_second.median << ','
        << c.timing.tokens_per_second.max << ',' << c.timing.frequency_hz.median << ',' << c.timing.wall_ratio_vs_ar
        << '\n';
  }
  return out.str();
}

std::string report_speed_csv(const BenchReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "mode,horizon,min,mean,max\n";
  for (const auto& c : report.cells)
    out << to_string(c.mode) << ',' << horizon_label(c) << ',' << c.timing.tokens_per_second.min << ','
        << c.timing.tokens_per_second.mean << ',' << c.timing.tokens_per_second.max << '\n';
  return out.str();
}

}  // namespace pardec
