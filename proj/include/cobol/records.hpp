#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "cobol/engine.hpp"

namespace cobol {

using json = nlohmann::json;

/// Parse a config object. Unknown keys and type errors are collected per
/// field; on any problem std::invalid_argument lists them all.
EngineConfig config_from_json(const json& j);
json config_to_json(const EngineConfig& c);

json step_to_json(const StepRecord& s);
StepRecord step_from_json(const json& j);

/// Header line of a run (everything except the steps).
json header_to_json(const RunRecord& r);
RunRecord header_from_json(const json& j);

/// One header line followed by one line per step, each tagged with schema 1.
std::string record_to_jsonl(const RunRecord& r);
std::vector<RunRecord> records_from_jsonl(const std::string& text);

void write_jsonl(const std::vector<RunRecord>& records, const std::string& path);
std::vector<RunRecord> read_jsonl(const std::string& path);

/// Every *.jsonl file under dir, in file-name order.
std::vector<RunRecord> read_jsonl_dir(const std::string& dir);

}  // namespace cobol
