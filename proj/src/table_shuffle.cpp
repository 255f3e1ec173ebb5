#include "protector/table_shuffle.hpp"

#include "protector/error.hpp"

#include <map>
#include <set>

namespace protector {

std::vector<std::optional<std::uint32_t>> resolve_table(const Module& module) {
    if (!module.table) return {};
    std::vector<std::optional<std::uint32_t>> slots(module.table->size.min);
    for (const auto& seg : module.elements) {
        if (!seg.offset.is_constant()) throw TransformError("element segment offset is not a constant; shuffle unsupported");
        const auto base = static_cast<std::uint32_t>(seg.offset.value);
        if (static_cast<std::uint64_t>(base) + seg.functions.size() > slots.size()) {
            throw TransformError("element segment exceeds table size");
        }
        for (std::size_t k = 0; k < seg.functions.size(); ++k) slots[base + k] = seg.functions[k];
    }
    return slots;
}

ShuffleReport shuffle_elem_segment(Module& module, const std::function<std::uint32_t()>& draw,
                                   const ShuffleOptions& options) {
    ShuffleReport report;
    if (!module.table) return report;
    auto slots = resolve_table(module);

    // Call sites.
    std::vector<IndirectCallSite> constant_sites;
    std::vector<IndirectCallSite> dynamic_sites;
    for (std::uint32_t d = 0; d < module.functions.size(); ++d) {
        const auto& body = module.functions[d].body;
        const auto func = static_cast<std::uint32_t>(module.imports.size() + d);
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (body[i].op != Opcode::call_indirect) continue;
            IndirectCallSite site{func, i, body[i].index, std::nullopt, std::nullopt};
            if (i > 0 && body[i - 1].op == Opcode::i32_const) {
                site.old_slot = static_cast<std::uint32_t>(body[i - 1].value);
                constant_sites.push_back(site);
            } else {
                dynamic_sites.push_back(site);
            }
        }
    }

    // Partition occupied slots by the occupant's signature (canonical: first type with that signature).
    auto canonical = [&module](std::uint32_t type_index) {
        for (std::uint32_t t = 0; t < module.types.size(); ++t) {
            if (module.types[t].same_signature(module.types[type_index])) return t;
        }
        return type_index;
    };
    std::map<std::uint32_t, std::vector<std::uint32_t>> partitions;
    for (std::uint32_t s = 0; s < slots.size(); ++s) {
        if (slots[s]) partitions[canonical(module.type_of(*slots[s]))].push_back(s);
    }

    std::set<std::uint32_t> pinned;
    if (options.pin_dynamic_partitions) {
        for (const auto& site : dynamic_sites) pinned.insert(canonical(site.type_index));
    }

    std::vector<std::uint32_t> destination(slots.size());
    for (std::uint32_t s = 0; s < slots.size(); ++s) destination[s] = s;
    std::set<std::uint32_t> moved_partitions;
    for (auto& [type, members] : partitions) {
        if (pinned.contains(type)) {
            report.pinned_types.push_back(type);
            continue;
        }
        std::vector<std::uint32_t> order = members;
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = draw() % i;
            std::swap(order[i - 1], order[j]);
        }
        // The occupant of members[k] moves to order[k].
        for (std::size_t k = 0; k < members.size(); ++k) {
            destination[members[k]] = order[k];
            if (order[k] != members[k]) moved_partitions.insert(type);
        }
    }

    for (const auto& site : dynamic_sites) {
        if (moved_partitions.contains(canonical(site.type_index))) report.uncovered.push_back(site);
        else report.pinned.push_back(site);
    }
    if (options.strict && !report.uncovered.empty()) {
        throw TransformError("table shuffle refused: " + std::to_string(report.uncovered.size()) +
                             " call_indirect site(s) take their index from a non-constant operand");
    }

    std::vector<std::optional<std::uint32_t>> shuffled(slots.size());
    for (std::uint32_t s = 0; s < slots.size(); ++s) {
        if (!slots[s]) continue;
        shuffled[destination[s]] = slots[s];
        report.mapping.push_back({s, destination[s], *slots[s]});
    }
    for (auto& seg : module.elements) {
        const auto base = static_cast<std::uint32_t>(seg.offset.value);
        for (std::size_t k = 0; k < seg.functions.size(); ++k) seg.functions[k] = *shuffled[base + k];
    }

    for (auto site : constant_sites) {
        const auto k = *site.old_slot;
        if (k >= slots.size() || !slots[k] || destination[k] == k) continue;
        site.new_slot = destination[k];
        auto& body = module.functions[site.function - module.imports.size()].body;
        body[site.position - 1].value = static_cast<std::int32_t>(*site.new_slot);
        report.rewritten.push_back(site);
    }
    return report;
}

} // namespace protector
