#include "cli.hpp"

#include "protector/canary.hpp"
#include "protector/corpus.hpp"
#include "protector/error.hpp"
#include "protector/interpreter.hpp"
#include "protector/overhead.hpp"
#include "protector/pass_engine.hpp"
#include "protector/prng.hpp"
#include "protector/wat.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <ostream>
#include <sstream>

namespace protector::cli {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("failed writing " + path);
}

json read_json(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

struct ProtectArgs {
    std::string input;
    std::string pass;
    bool shuffle = false;
    bool shuffle_unpinned = false;
    bool strict = false;
    std::vector<std::string> skip;
    std::string sp;
    std::optional<std::uint32_t> seed;
    std::string out;
    std::string glue;
    std::optional<std::uint32_t> glue_time;
    std::string report;
};

struct RunArgs {
    std::string input;
    std::string invoke;
    std::vector<std::int64_t> args;
    std::optional<std::uint32_t> input_addr;
    std::string input_hex;
    std::optional<std::uint32_t> time;
    bool count = false;
};

struct ReportArgs {
    std::string base;
    std::string protected_run;
    std::string transform;
};

int do_protect(const ProtectArgs& a, std::ostream& err) {
    if (a.pass.empty() && !a.shuffle) {
        err << "protect: choose --pass and/or --shuffle-table\n";
        return kExitUsage;
    }
    PassConfig config = a.pass.empty() ? PassConfig{} : pass_config_for(a.pass);
    config.enable_table_shuffle = a.shuffle;
    config.pin_dynamic_partitions = !a.shuffle_unpinned;
    config.strict_shuffle = a.strict;
    for (const auto& s : a.skip) config.skip_names.insert(s.starts_with('$') ? s : "$" + s);
    if (!a.sp.empty()) config.sp_override = a.sp.starts_with('$') ? a.sp : "$" + a.sp;
    config.seed = a.seed;

    const Module original = wat::parse_module(read_file(a.input));
    auto result = apply_passes(original, config);
    write_file(a.out, wat::print_module(result.module));

    if (!a.glue.empty()) write_file(a.glue, emit_host_glue(result.module, a.glue_time));
    if (!a.report.empty()) {
        OverheadReport report;
        report.passes = result.passes;
        report.stats = result.stats;
        if (result.shuffle) report.table_shuffle = to_json(*result.shuffle, result.module);
        write_file(a.report, to_json(report).dump(2) + "\n");
    }
    if (result.shuffle && !result.shuffle->uncovered.empty()) {
        err << "warning: " << result.shuffle->uncovered.size()
            << " indirect call site(s) with a non-constant index may reach a moved slot\n";
    }
    return kExitOk;
}

int do_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
    if (a.input_addr.has_value() != !a.input_hex.empty()) {
        err << "run: --input-addr and --input-hex go together\n";
        return kExitUsage;
    }
    Module module = wat::parse_module(read_file(a.input));
    tag_canary_checks(module);
    Instance instance(std::move(module), HostConfig{a.time});
    if (a.input_addr) instance.poke_input(*a.input_addr, parse_hex(a.input_hex));

    std::vector<std::uint32_t> args;
    for (auto v : a.args) {
        if (v < INT32_MIN || v > UINT32_MAX) {
            err << "run: argument " << v << " does not fit in i32\n";
            return kExitUsage;
        }
        args.push_back(static_cast<std::uint32_t>(v));
    }
    const auto result = instance.invoke(a.invoke, args);

    if (a.count) {
        out << run_result_to_json(result, instance).dump(2) << "\n";
    } else if (!result.trapped()) {
        for (auto v : result.values()) out << static_cast<std::int32_t>(v) << "\n";
    }
    if (result.trapped()) {
        err << "trap: " << to_string(result.trap()) << "\n";
        return kExitTrap;
    }
    return kExitOk;
}

int do_report(const ReportArgs& a, std::ostream& out) {
    const auto base = run_record_from_json(read_json(a.base));
    const auto prot = run_record_from_json(read_json(a.protected_run));

    OverheadReport report;
    if (!a.transform.empty()) report = overhead_report_from_json(read_json(a.transform));
    report.calls = prot.calls;
    report.measured_extra = measure_overhead(base.result, prot.result);
    if (!a.transform.empty()) report.predicted_extra = predict_overhead(report.stats, prot.calls);
    out << to_json(report).dump(2) << "\n";
    return kExitOk;
}

} // namespace

std::vector<std::string> rewrite_legacy_flags(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    for (const auto& arg : args) {
        if (arg == "-ASLR") {
            out.insert(out.end(), {"--pass", "aslr"});
        } else if (arg == "-canary") {
            out.insert(out.end(), {"--pass", "canary"});
        } else if (arg == "-canary_and_ASLR") {
            out.insert(out.end(), {"--pass", "both"});
        } else {
            out.push_back(arg);
        }
    }
    return out;
}

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stack hardening for WebAssembly text modules", "protector"};
    app.require_subcommand(1);

    ProtectArgs pa;
    auto* protect = app.add_subcommand("protect", "Insert canaries and/or stack-pointer randomization");
    protect->add_option("input", pa.input, "Input .wat")->required()->check(CLI::ExistingFile);
    protect->add_option("--pass", pa.pass, "aslr, canary or both")
        ->check(CLI::IsMember({"aslr", "canary", "both"}));
    protect->add_flag("--shuffle-table", pa.shuffle, "Permute same-signature table slots");
    protect->add_flag("--shuffle-unpinned", pa.shuffle_unpinned,
                      "Also permute partitions reached by non-constant call_indirect");
    protect->add_flag("--strict", pa.strict, "Refuse the shuffle when any call site is uncovered");
    protect->add_option("--skip", pa.skip, "Function to leave untouched (repeatable)");
    protect->add_option("--sp", pa.sp, "Stack-pointer global name");
    protect->add_option("--seed", pa.seed, "Seed for the table shuffle");
    protect->add_option("--out", pa.out, "Output .wat")->required();
    protect->add_option("--emit-glue", pa.glue, "Write the JavaScript import object here");
    protect->add_option("--glue-time", pa.glue_time, "Make the emitted glue return this time");
    protect->add_option("--report", pa.report, "Write static insertion counts as JSON");

    RunArgs ra;
    auto* run = app.add_subcommand("run", "Execute an export in the built-in interpreter");
    run->add_option("input", ra.input, "Module .wat")->required()->check(CLI::ExistingFile);
    run->add_option("--invoke", ra.invoke, "Export to call")->required();
    run->add_option("--arg", ra.args, "i32 argument (repeatable)");
    run->add_option("--input-addr", ra.input_addr, "Address for --input-hex");
    run->add_option("--input-hex", ra.input_hex, "Bytes written to memory before the call");
    run->add_option("--time", ra.time, "Fixed value for env.time");
    run->add_flag("--count", ra.count, "Print the run record with executed-instruction counters as JSON");

    ReportArgs rp;
    auto* report = app.add_subcommand("report", "Compare a base and a protected run record");
    report->add_option("--base", rp.base, "Run record of the unprotected module")->required()->check(CLI::ExistingFile);
    report->add_option("--protected", rp.protected_run, "Run record of the protected module")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("--transform", rp.transform, "Report written by protect --report")
        ->check(CLI::ExistingFile);

    const auto args = rewrite_legacy_flags(raw_args);
    std::vector<const char*> argv{"protector"};
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        if (const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front()) {
            err << sub->help();
        }
        return kExitUsage;
    }

    try {
        if (protect->parsed()) return do_protect(pa, err);
        if (run->parsed()) return do_run(ra, out, err);
        return do_report(rp, out);
    } catch (const HarnessError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

} // namespace protector::cli
