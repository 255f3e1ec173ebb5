#pragma once

#include "protector/ir.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace protector {

inline constexpr std::size_t kPageSize = 65536;
inline constexpr std::size_t kMaxCallDepth = 10000;

enum class TrapReason : std::uint8_t {
    unreachable,
    canary_mismatch,
    out_of_bounds_memory,
    undefined_table_entry,
    signature_mismatch,
    stack_exhausted,
};

/// "Unreachable", "CanaryMismatch", ...
std::string_view to_string(TrapReason reason);
std::optional<TrapReason> parse_trap_reason(std::string_view text);

struct HostConfig {
    /// Value returned by `env.time`; the system clock (epoch seconds) when unset.
    std::optional<std::uint32_t> fixed_time;
};

struct ExecutionCounters {
    CategoryCounts executed;
    std::vector<std::uint64_t> calls; // indexed by function index, imports included

    [[nodiscard]] std::uint64_t total() const { return executed.total(); }
    friend bool operator==(const ExecutionCounters&, const ExecutionCounters&) = default;
};

struct RunResult {
    std::variant<std::vector<std::uint32_t>, TrapReason> outcome;
    ExecutionCounters counters;

    [[nodiscard]] bool trapped() const { return std::holds_alternative<TrapReason>(outcome); }
    [[nodiscard]] TrapReason trap() const { return std::get<TrapReason>(outcome); }
    [[nodiscard]] const std::vector<std::uint32_t>& values() const { return std::get<std::vector<std::uint32_t>>(outcome); }

    friend bool operator==(const RunResult&, const RunResult&) = default;
};

/// A module with its own linear memory, globals and table. Locals, the
/// operand stack and return addresses live in host structures that no
/// load/store can address.
class Instance {
  public:
    /// Allocates memory, applies data segments, fills the table and runs the
    /// start function. Throws LinkError on unknown imports or out-of-range segments.
    Instance(Module module, HostConfig host = {});

    [[nodiscard]] const Module& module() const { return module_; }

    RunResult invoke(std::string_view export_name, std::span<const std::uint32_t> args = {});
    RunResult invoke_function(std::uint32_t func, std::span<const std::uint32_t> args = {});

    /// Writes attacker- or test-controlled bytes; throws HarnessError when out of bounds.
    void poke_input(std::uint32_t address, std::span<const std::uint8_t> bytes);
    [[nodiscard]] std::vector<std::uint8_t> read_memory(std::uint32_t address, std::size_t length) const;
    [[nodiscard]] std::span<const std::uint8_t> memory() const { return memory_; }

    [[nodiscard]] std::uint32_t global(std::uint32_t index) const { return globals_.at(index); }
    [[nodiscard]] const std::vector<std::uint32_t>& globals() const { return globals_; }
    /// Value of an exported global; throws HarnessError if no such export.
    [[nodiscard]] std::uint32_t exported_global(std::string_view name) const;
    void set_global(std::uint32_t index, std::uint32_t value) { globals_.at(index) = value; }

    [[nodiscard]] const std::vector<std::optional<std::uint32_t>>& table() const { return table_; }
    void set_fixed_time(std::optional<std::uint32_t> t) { host_.fixed_time = t; }

  private:
    struct Impl;

    Module module_;
    HostConfig host_;
    std::vector<std::uint8_t> memory_;
    std::vector<std::uint32_t> globals_;
    std::vector<std::optional<std::uint32_t>> table_;
    std::vector<std::vector<std::size_t>> ends_; // per defined function, see match_ends
};

/// Convenience wrapper around the Instance constructor.
inline Instance instantiate(Module module, HostConfig host = {}) { return Instance(std::move(module), host); }

} // namespace protector
