#pragma once

#include "protector/corpus.hpp"
#include "protector/interpreter.hpp"
#include "protector/ir.hpp"
#include "protector/pass_engine.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace protector::test {

inline const std::vector<std::string> kModes = {"none", "aslr", "canary", "both"};

std::string slurp(const std::string& path);

/// Random module in the printer's canonical shape: parse(print(m)) must equal m.
Module random_module(std::mt19937& rng);

/// Random single-result function bodies that exit through nested returns and
/// branches to the function label. Always terminate.
Module random_exit_module(std::mt19937& rng, std::size_t functions);

/// Human-readable location of the first structural difference, empty when equal.
std::string first_difference(const Module& a, const Module& b);

/// Module transformed for a pass mode ("none" returns it unchanged).
TransformResult protect(const Module& module, const std::string& mode);

struct CaseRun {
    RunResult result;
    std::optional<std::uint32_t> flag;
    std::uint32_t sp_before = 0;
    std::uint32_t sp_after = 0;
    std::vector<std::uint8_t> memory;
    std::vector<std::uint32_t> globals;
};

/// Instantiates `module` with the case's time, pokes `input` and calls the entry.
CaseRun run_case(const CorpusCase& c, const Module& module, const std::vector<std::uint8_t>& input,
                 std::optional<std::uint32_t> time = std::nullopt);

/// Memory outside the case's stack region.
std::vector<std::uint8_t> non_stack_memory(const CorpusCase& c, const std::vector<std::uint8_t>& memory);

/// Module-declared globals other than the stack pointer (embedded ones dropped).
std::vector<std::uint32_t> user_globals(const Module& original, const std::vector<std::uint32_t>& globals);

/// Smallest time value whose first ASLR draw yields `offset`.
std::optional<std::uint32_t> time_for_offset(std::uint32_t offset, std::uint32_t limit = 1u << 20);

} // namespace protector::test
