#pragma once

#include "protector/interpreter.hpp"
#include "protector/pass_engine.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace protector {

/// Per-function difference between a module and its transformed version.
/// Defined functions are matched by position; `before` must be a prefix of
/// `after` with equal names. Functions only present in `after` count as wholly
/// inserted. Throws Error on a mismatch or a function that shrank.
InsertionStats static_insertion_stats(const Module& before, const Module& after);

/// Extra instructions a run executes: sum over f of per_call(f) * calls(f).
std::uint64_t predict_overhead(const InsertionStats& stats, const ExecutionCounters& counters);
std::uint64_t predict_overhead(const InsertionStats& stats, const std::map<std::string, std::uint64_t>& calls_by_name);

/// protected.total - base.total. Throws Error when either run trapped.
std::uint64_t measure_overhead(const RunResult& base, const RunResult& protected_run);

/// Per-call category counts the reference evaluation lists for each pass.
struct ReferenceRow {
    std::string pass;
    CategoryCounts counts;
};
std::vector<ReferenceRow> reference_rows();

struct OverheadReport {
    std::vector<std::string> passes;
    InsertionStats stats;
    std::map<std::string, std::uint64_t> calls; // by function display name
    std::optional<std::uint64_t> predicted_extra;
    std::optional<std::uint64_t> measured_extra;
    std::optional<nlohmann::json> table_shuffle; // see to_json(ShuffleReport, Module)
};

nlohmann::json to_json(const OverheadReport& report);
/// Reads back the parts of a report needed to predict: passes, per-function
/// counts, trap paths and the shuffle section when present.
OverheadReport overhead_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ShuffleReport& report, const Module& module);

/// Run record: outcome, counters, per-function calls by name and exported globals.
nlohmann::json run_result_to_json(const RunResult& result, const Instance& instance);

struct RunRecord {
    RunResult result;
    std::map<std::string, std::uint64_t> calls; // by function display name
};
RunRecord run_record_from_json(const nlohmann::json& j);

} // namespace protector
