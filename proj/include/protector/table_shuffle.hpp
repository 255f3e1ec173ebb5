#pragma once

#include "protector/ir.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace protector {

struct SlotMove {
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    std::uint32_t function = 0; // occupant that moved

    friend bool operator==(const SlotMove&, const SlotMove&) = default;
};

struct IndirectCallSite {
    std::uint32_t function = 0; // function containing the call_indirect
    std::size_t position = 0;   // instruction index in its body
    std::uint32_t type_index = 0;
    std::optional<std::uint32_t> old_slot; // constant index, when statically known
    std::optional<std::uint32_t> new_slot;

    friend bool operator==(const IndirectCallSite&, const IndirectCallSite&) = default;
};

/// Outcome of an element-table shuffle.
///  - rewritten: `i32.const k; call_indirect` sites whose constant followed its occupant.
///  - uncovered: non-constant sites whose signature partition was permuted; their target may have changed.
///  - pinned: non-constant sites whose partition was held in place.
struct ShuffleReport {
    std::vector<SlotMove> mapping;
    std::vector<IndirectCallSite> rewritten;
    std::vector<IndirectCallSite> uncovered;
    std::vector<IndirectCallSite> pinned;
    std::vector<std::uint32_t> pinned_types;

    friend bool operator==(const ShuffleReport&, const ShuffleReport&) = default;
};

struct ShuffleOptions {
    bool pin_dynamic_partitions = true;
    bool strict = false; // refuse when any site is uncovered
};

/// Permutes element-segment entries among slots whose occupants share a
/// signature and rewrites constant-index call sites to follow. `draw` supplies
/// the random sequence (Fisher-Yates, `draw() % (i + 1)`).
ShuffleReport shuffle_elem_segment(Module& module, const std::function<std::uint32_t()>& draw,
                                   const ShuffleOptions& options = {});

/// Final table contents after applying element segments with constant offsets.
/// Throws TransformError on a non-constant offset or a segment past the table end.
std::vector<std::optional<std::uint32_t>> resolve_table(const Module& module);

} // namespace protector
