#pragma once

// JSON and CSV renderings. Schema ids are carried in every document:
//   pardec.trace/1   decode trace
//   pardec.decode/1  one-shot decode result (tokens + chunk or codec error)
//   pardec.report/1  benchmark report; per-cell wall-clock data lives under
//                    "timing" and is the only run-dependent part
// Chunks are plain arrays of 7-element rows [x, y, z, phi, theta, psi, g].

#include <nlohmann/json.hpp>

#include <string>

#include "pardec/action_codec.hpp"
#include "pardec/bench.hpp"
#include "pardec/decoder.hpp"
#include "pardec/model.hpp"

namespace pardec {

using json = nlohmann::json;

json to_json(const ModelSpec& spec);
json to_json(const CodecConfig& codec);

json chunk_to_json(const ActionChunk& chunk);
/// Throws CodecError (Framing) unless every row has exactly 7 numbers.
ActionChunk chunk_from_json(const json& rows);

json trace_to_json(const DecodeTrace& trace, bool include_iterates);

json report_to_json(const BenchReport& report);
/// Drops every "timing" member; what remains is deterministic for fixed seeds.
json strip_timing(json report);

/// One row per cell.
std::string report_cells_csv(const BenchReport& report);
/// horizon,min,mean,max tokens/s per cell ("ar" for the baseline).
std::string report_speed_csv(const BenchReport& report);

}  // namespace pardec
