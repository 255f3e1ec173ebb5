#include "protector/overhead.hpp"

#include "protector/canary.hpp"
#include "protector/error.hpp"

#include <algorithm>

namespace protector {

namespace {

using nlohmann::json;

constexpr std::array<Category, 4> kReportedCategories = {Category::arithmetic, Category::variable, Category::memory,
                                                         Category::control};

std::uint64_t count_tagged(const std::vector<Instruction>& body) {
    return static_cast<std::uint64_t>(
        std::count_if(body.begin(), body.end(), [](const Instruction& i) { return i.tag == InstrTag::canary_check; }));
}

json counts_json(const CategoryCounts& counts) {
    json j = json::object();
    for (auto c : kReportedCategories) j[std::string(to_string(c))] = counts[c];
    return j;
}

CategoryCounts counts_from_json(const json& j) {
    CategoryCounts counts;
    for (auto c : kReportedCategories) counts[c] = j.value(std::string(to_string(c)), std::uint64_t{0});
    return counts;
}

json site_json(const IndirectCallSite& site, const Module& module) {
    json j{{"function", module.display_name(site.function)}, {"position", site.position}, {"type", site.type_index}};
    if (site.old_slot) j["old_slot"] = *site.old_slot;
    if (site.new_slot) j["new_slot"] = *site.new_slot;
    return j;
}

} // namespace

InsertionStats static_insertion_stats(const Module& before, const Module& after) {
    if (after.functions.size() < before.functions.size()) {
        throw Error("function list mismatch: transformed module has fewer functions");
    }
    // Text round trips drop the canary tags; restore them on copies.
    Module b = before;
    Module a = after;
    tag_canary_checks(b);
    tag_canary_checks(a);

    InsertionStats stats;
    for (std::size_t d = 0; d < a.functions.size(); ++d) {
        FunctionInsertion fi;
        fi.function = static_cast<std::uint32_t>(a.imports.size() + d);
        fi.name = a.display_name(fi.function);
        const auto after_counts = count_categories(a.functions[d].body);
        const auto after_tagged = count_tagged(a.functions[d].body);
        if (d < b.functions.size()) {
            if (b.functions[d].name != a.functions[d].name) {
                throw Error("function list mismatch at position " + std::to_string(d) + ": " +
                            b.display_name(static_cast<std::uint32_t>(b.imports.size() + d)) + " vs " + fi.name);
            }
            const auto before_counts = count_categories(b.functions[d].body);
            for (std::size_t c = 0; c < kCategoryCount; ++c) {
                if (after_counts.values[c] < before_counts.values[c]) {
                    throw Error("function " + fi.name + " lost instructions during transformation");
                }
                fi.inserted.values[c] = after_counts.values[c] - before_counts.values[c];
            }
            fi.trap_path = after_tagged - std::min(after_tagged, count_tagged(b.functions[d].body));
        } else {
            fi.inserted = after_counts;
            fi.trap_path = after_tagged;
        }
        stats.functions.push_back(std::move(fi));
    }
    return stats;
}

std::uint64_t predict_overhead(const InsertionStats& stats, const ExecutionCounters& counters) {
    std::uint64_t total = 0;
    for (const auto& f : stats.functions) {
        if (f.function < counters.calls.size()) total += f.per_call() * counters.calls[f.function];
    }
    return total;
}

std::uint64_t predict_overhead(const InsertionStats& stats, const std::map<std::string, std::uint64_t>& calls_by_name) {
    std::uint64_t total = 0;
    for (const auto& f : stats.functions) {
        if (auto it = calls_by_name.find(f.name); it != calls_by_name.end()) total += f.per_call() * it->second;
    }
    return total;
}

std::uint64_t measure_overhead(const RunResult& base, const RunResult& protected_run) {
    if (base.trapped() || protected_run.trapped()) throw Error("overhead is undefined for a trapping run");
    const auto b = base.counters.total();
    const auto p = protected_run.counters.total();
    if (p < b) throw Error("protected run executed fewer instructions than the base run");
    return p - b;
}

std::vector<ReferenceRow> reference_rows() {
    ReferenceRow aslr{"aslr", {}};
    aslr.counts[Category::arithmetic] = 21;
    aslr.counts[Category::variable] = 12;
    ReferenceRow canary{"canary", {}};
    canary.counts[Category::arithmetic] = 16;
    canary.counts[Category::variable] = 16;
    canary.counts[Category::memory] = 2;
    canary.counts[Category::control] = 5;
    return {aslr, canary};
}

json to_json(const ShuffleReport& report, const Module& module) {
    json mapping = json::array();
    for (const auto& m : report.mapping) {
        mapping.push_back({{"from", m.from}, {"to", m.to}, {"function", module.display_name(m.function)}});
    }
    auto sites = [&](const std::vector<IndirectCallSite>& list) {
        json arr = json::array();
        for (const auto& s : list) arr.push_back(site_json(s, module));
        return arr;
    };
    return json{{"mapping", mapping},
                {"rewritten", sites(report.rewritten)},
                {"uncovered", sites(report.uncovered)},
                {"pinned", sites(report.pinned)},
                {"pinned_types", report.pinned_types},
                {"uncovered_count", report.uncovered.size()}};
}

json to_json(const OverheadReport& report) {
    json functions = json::array();
    for (const auto& f : report.stats.functions) {
        json entry{{"name", f.name}, {"inserted", counts_json(f.inserted)}, {"per_call", f.per_call()},
                   {"trap_path", f.trap_path}};
        auto it = report.calls.find(f.name);
        entry["calls"] = it == report.calls.end() ? json(nullptr) : json(it->second);
        functions.push_back(std::move(entry));
    }
    json reference = json::object();
    for (const auto& row : reference_rows()) {
        auto j = counts_json(row.counts);
        j["reference"] = true;
        reference[row.pass] = std::move(j);
    }
    json out{{"passes", report.passes}, {"functions", functions}, {"paper_reference", reference}};
    out["predicted_extra"] = report.predicted_extra ? json(*report.predicted_extra) : json(nullptr);
    out["measured_extra"] = report.measured_extra ? json(*report.measured_extra) : json(nullptr);
    if (report.table_shuffle) out["table_shuffle"] = *report.table_shuffle;
    return out;
}

OverheadReport overhead_report_from_json(const json& j) {
    OverheadReport report;
    try {
        report.passes = j.at("passes").get<std::vector<std::string>>();
        for (const auto& entry : j.at("functions")) {
            FunctionInsertion f;
            f.name = entry.at("name").get<std::string>();
            f.inserted = counts_from_json(entry.at("inserted"));
            f.trap_path = entry.value("trap_path", std::uint64_t{0});
            report.stats.functions.push_back(std::move(f));
        }
        if (j.contains("table_shuffle")) report.table_shuffle = j.at("table_shuffle");
    } catch (const json::exception& e) {
        throw Error(std::string("malformed overhead report: ") + e.what());
    }
    return report;
}

json run_result_to_json(const RunResult& result, const Instance& instance) {
    const auto& module = instance.module();
    json j;
    if (result.trapped()) {
        j["outcome"] = "trap";
        j["trap"] = to_string(result.trap());
    } else {
        j["outcome"] = "values";
        j["values"] = result.values();
    }
    json executed = counts_json(result.counters.executed);
    executed["total"] = result.counters.total();
    j["counters"] = executed;
    json calls = json::object();
    for (std::uint32_t f = 0; f < result.counters.calls.size(); ++f) {
        if (result.counters.calls[f] != 0) calls[module.display_name(f)] = result.counters.calls[f];
    }
    j["calls"] = calls;
    json globals = json::object();
    for (const auto& e : module.exports) {
        if (e.kind == ExternalKind::global) globals[e.name] = instance.global(e.index);
    }
    j["globals"] = globals;
    return j;
}

RunRecord run_record_from_json(const json& j) {
    RunRecord record;
    try {
        if (j.at("outcome") == "trap") {
            const auto text = j.at("trap").get<std::string>();
            auto reason = parse_trap_reason(text);
            if (!reason) throw Error("unknown trap reason \"" + text + "\"");
            record.result.outcome = *reason;
        } else {
            record.result.outcome = j.at("values").get<std::vector<std::uint32_t>>();
        }
        record.result.counters.executed = counts_from_json(j.at("counters"));
        if (record.result.counters.total() != j.at("counters").at("total").get<std::uint64_t>()) {
            throw Error("run record total does not match its category counters");
        }
        record.calls = j.at("calls").get<std::map<std::string, std::uint64_t>>();
    } catch (const json::exception& e) {
        throw Error(std::string("malformed run record: ") + e.what());
    }
    return record;
}

} // namespace protector
