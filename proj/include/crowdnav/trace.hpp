#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdnav/metrics.hpp"

namespace crowdnav {

/// JSONL: one header object ("type": "header") per episode followed by one
/// "step" object per line. Doubles round-trip exactly; NaN is written as null.
nlohmann::json trace_header_json(const EpisodeTrace& trace);
nlohmann::json step_json(const StepRecord& step);

void write_trace(std::ostream& out, const EpisodeTrace& trace);
void write_traces(const std::string& path, const std::vector<EpisodeTrace>& traces);

/// Reads every episode in a JSONL stream. Throws InputError on malformed lines
/// (the message carries the line number).
std::vector<EpisodeTrace> read_traces(std::istream& in);
std::vector<EpisodeTrace> read_traces(const std::string& path);

}  // namespace crowdnav
