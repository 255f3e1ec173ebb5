#pragma once

#include "protector/interpreter.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace protector {

/// Either returned values or a trap, plus the flag global when the case has one.
struct ExpectedOutcome {
    std::optional<std::vector<std::uint32_t>> values;
    std::optional<TrapReason> trap;
    std::optional<std::uint32_t> flag;

    /// Whether `result` (and the flag value read after it) matches.
    [[nodiscard]] bool matches(const RunResult& result, std::optional<std::uint32_t> flag_value) const;
    [[nodiscard]] std::string describe() const;
};

struct CaseExpectation {
    ExpectedOutcome benign;
    std::optional<ExpectedOutcome> attack;
};

struct CorpusCase {
    std::string name;
    std::string description;
    std::filesystem::path module_path;
    std::string module_text;
    std::string entry;
    std::uint32_t input_addr = 0;
    std::uint32_t buffer_size = 0;
    std::vector<std::uint8_t> benign_input;
    std::optional<std::vector<std::uint8_t>> attack_input;
    std::uint32_t overrun_bytes = 0;
    std::optional<std::string> flag_global;
    std::pair<std::uint32_t, std::uint32_t> stack_region; // [begin, end)
    std::uint32_t time = 0;
    std::map<std::string, CaseExpectation> expected; // keyed by pass mode: none, aslr, canary, both

    [[nodiscard]] Module parse() const;
};

std::vector<std::string> corpus_case_names();
std::filesystem::path default_corpus_dir();

/// Throws Error for an unknown name (listing the available ones) or a malformed fixture.
CorpusCase load_corpus_case(std::string_view name, const std::filesystem::path& dir = default_corpus_dir());

/// Length-prefixed input (u32 little-endian length, then bytes) with the
/// payload cut short by `drop` bytes.
std::vector<std::uint8_t> shrink_framed_input(std::span<const std::uint8_t> framed, std::uint32_t drop);

std::vector<std::uint8_t> parse_hex(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> bytes);

} // namespace protector
