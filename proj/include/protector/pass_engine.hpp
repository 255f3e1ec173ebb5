#pragma once

#include "protector/ir.hpp"
#include "protector/table_shuffle.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace protector {

/// Functions that move the stack pointer on purpose and are never instrumented.
std::set<std::string> default_skip_names();

struct PassConfig {
    bool enable_aslr = false;
    bool enable_canary = false;
    bool enable_table_shuffle = false;
    std::set<std::string> skip_names = default_skip_names();
    std::optional<std::string> sp_override;
    /// Seed for the transform-time generator (table shuffle). Unset: host clock.
    std::optional<std::uint32_t> seed;
    bool pin_dynamic_partitions = true;
    bool strict_shuffle = false;

    [[nodiscard]] bool any_enabled() const { return enable_aslr || enable_canary || enable_table_shuffle; }
    /// Names of the enabled passes, in application order.
    [[nodiscard]] std::vector<std::string> pass_names() const;
};

/// Canary/ASLR selection by mode name: "none", "aslr", "canary" or "both".
/// Throws Error for anything else.
PassConfig pass_config_for(std::string_view mode);

struct FunctionInsertion {
    std::uint32_t function = 0;
    std::string name;
    CategoryCounts inserted;
    /// Inserted instructions that only execute when a check fails.
    std::uint64_t trap_path = 0;

    /// Inserted instructions executed by one non-trapping call.
    [[nodiscard]] std::uint64_t per_call() const { return inserted.total() - trap_path; }

    friend bool operator==(const FunctionInsertion&, const FunctionInsertion&) = default;
};

struct InsertionStats {
    std::vector<FunctionInsertion> functions; // one per defined function of the output module

    [[nodiscard]] CategoryCounts totals() const;
    [[nodiscard]] const FunctionInsertion* find(std::string_view name) const;

    friend bool operator==(const InsertionStats&, const InsertionStats&) = default;
};

/// Encloses the body in one block carrying the function's result type and
/// turns every `return` into a branch to that block, so code appended after
/// the block runs on every exit.
void wrap_body_for_epilogue(const Module& module, FunctionDef& function);

struct TransformResult {
    Module module;
    InsertionStats stats;
    std::optional<ShuffleReport> shuffle;
    std::vector<std::string> passes;
};

/// Runs the enabled passes: table shuffle first, then PRNG embedding and
/// canary/ASLR instrumentation of every defined function not on the skip list.
/// When nothing is instrumented the PRNG is not embedded and the module is
/// returned unchanged.
TransformResult apply_passes(Module module, const PassConfig& config);

} // namespace protector
