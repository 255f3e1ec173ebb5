#include "protector/ir.hpp"

#include "protector/error.hpp"

#include <algorithm>

namespace protector {

namespace {

using enum Category;
using IK = ImmediateKind;

constexpr std::array<OpcodeInfo, kOpcodeCount> kOpcodes{{
    {Opcode::i32_const, "i32.const", arithmetic, IK::i32_value, 0},
    {Opcode::i32_add, "i32.add", arithmetic, IK::none, 0},
    {Opcode::i32_sub, "i32.sub", arithmetic, IK::none, 0},
    {Opcode::i32_mul, "i32.mul", arithmetic, IK::none, 0},
    {Opcode::i32_and, "i32.and", arithmetic, IK::none, 0},
    {Opcode::i32_or, "i32.or", arithmetic, IK::none, 0},
    {Opcode::i32_xor, "i32.xor", arithmetic, IK::none, 0},
    {Opcode::i32_shl, "i32.shl", arithmetic, IK::none, 0},
    {Opcode::i32_shr_s, "i32.shr_s", arithmetic, IK::none, 0},
    {Opcode::i32_shr_u, "i32.shr_u", arithmetic, IK::none, 0},
    {Opcode::i32_eq, "i32.eq", arithmetic, IK::none, 0},
    {Opcode::i32_ne, "i32.ne", arithmetic, IK::none, 0},
    {Opcode::i32_lt_u, "i32.lt_u", arithmetic, IK::none, 0},
    {Opcode::i32_gt_u, "i32.gt_u", arithmetic, IK::none, 0},
    {Opcode::i32_eqz, "i32.eqz", arithmetic, IK::none, 0},
    {Opcode::local_get, "local.get", variable, IK::local, 0},
    {Opcode::local_set, "local.set", variable, IK::local, 0},
    {Opcode::local_tee, "local.tee", variable, IK::local, 0},
    {Opcode::global_get, "global.get", variable, IK::global, 0},
    {Opcode::global_set, "global.set", variable, IK::global, 0},
    {Opcode::i32_load, "i32.load", memory, IK::memarg, 4},
    {Opcode::i32_store, "i32.store", memory, IK::memarg, 4},
    {Opcode::i32_load8_u, "i32.load8_u", memory, IK::memarg, 1},
    {Opcode::i32_store8, "i32.store8", memory, IK::memarg, 1},
    {Opcode::memory_size, "memory.size", memory, IK::none, 0},
    {Opcode::block, "block", control, IK::block, 0},
    {Opcode::loop, "loop", control, IK::block, 0},
    {Opcode::end, "end", control, IK::none, 0},
    {Opcode::br, "br", control, IK::label, 0},
    {Opcode::br_if, "br_if", control, IK::label, 0},
    {Opcode::return_, "return", control, IK::none, 0},
    {Opcode::unreachable, "unreachable", control, IK::none, 0},
    {Opcode::nop, "nop", control, IK::none, 0},
    {Opcode::drop, "drop", control, IK::none, 0},
    {Opcode::call, "call", control, IK::function, 0},
    {Opcode::call_indirect, "call_indirect", control, IK::type, 0},
}};

static_assert([] {
    for (std::size_t i = 0; i < kOpcodes.size(); ++i) {
        if (static_cast<std::size_t>(kOpcodes[i].opcode) != i) return false;
    }
    return true;
}());

} // namespace

std::string_view to_string(ValueKind) { return "i32"; }

std::string_view to_string(Category category) {
    switch (category) {
    case Category::arithmetic: return "arithmetic";
    case Category::variable: return "variable";
    case Category::memory: return "memory";
    case Category::control: return "control";
    case Category::other: return "other";
    }
    return "other";
}

std::string_view to_string(ExternalKind kind) {
    switch (kind) {
    case ExternalKind::function: return "func";
    case ExternalKind::table: return "table";
    case ExternalKind::memory: return "memory";
    case ExternalKind::global: return "global";
    }
    return "func";
}

const OpcodeInfo& info(Opcode op) { return kOpcodes.at(static_cast<std::size_t>(op)); }

std::optional<Opcode> lookup_opcode(std::string_view mnemonic) {
    for (const auto& entry : kOpcodes) {
        if (entry.mnemonic == mnemonic) return entry.opcode;
    }
    return std::nullopt;
}

Category classify_instruction(std::string_view mnemonic) {
    const auto op = lookup_opcode(mnemonic);
    if (!op) throw Error("cannot classify unsupported instruction '" + std::string(mnemonic) + "'");
    return classify(*op);
}

std::uint32_t Module::type_of(std::uint32_t func) const {
    if (func < imports.size()) return imports[func].type_index;
    const auto defined = func - imports.size();
    if (defined >= functions.size()) throw Error("function index " + std::to_string(func) + " out of range");
    return functions[defined].type_index;
}

const FuncType& Module::signature_of(std::uint32_t func) const { return types.at(type_of(func)); }

std::optional<std::string> Module::function_name(std::uint32_t func) const {
    if (func < imports.size()) return imports[func].name;
    const auto defined = func - imports.size();
    if (defined >= functions.size()) return std::nullopt;
    return functions[defined].name;
}

std::string Module::display_name(std::uint32_t func) const {
    if (auto name = function_name(func)) return *name;
    return "#" + std::to_string(func);
}

std::optional<std::uint32_t> Module::find_function(std::string_view name) const {
    for (std::uint32_t i = 0; i < function_count(); ++i) {
        if (function_name(i) == name) return i;
    }
    return std::nullopt;
}

std::optional<std::uint32_t> Module::find_global(std::string_view name) const {
    for (std::uint32_t i = 0; i < globals.size(); ++i) {
        if (globals[i].name == name) return i;
    }
    return std::nullopt;
}

const Export* Module::find_export(std::string_view name, ExternalKind kind) const {
    for (const auto& e : exports) {
        if (e.name == name && e.kind == kind) return &e;
    }
    return nullptr;
}

std::uint32_t intern_type(Module& module, const std::vector<ValueKind>& params, std::optional<ValueKind> result) {
    const FuncType wanted{params, result, std::nullopt};
    for (std::uint32_t i = 0; i < module.types.size(); ++i) {
        if (module.types[i].same_signature(wanted)) return i;
    }
    module.types.push_back(wanted);
    return static_cast<std::uint32_t>(module.types.size() - 1);
}

std::uint32_t add_function_import(Module& module, Import import) {
    const auto new_index = static_cast<std::uint32_t>(module.imports.size());
    auto shift = [new_index](std::uint32_t& func) {
        if (func >= new_index) ++func;
    };
    for (auto& fn : module.functions) {
        for (auto& instr : fn.body) {
            if (instr.op == Opcode::call) shift(instr.index);
        }
    }
    for (auto& seg : module.elements) {
        for (auto& f : seg.functions) shift(f);
    }
    for (auto& e : module.exports) {
        if (e.kind == ExternalKind::function) shift(e.index);
    }
    if (module.start) shift(*module.start);
    module.imports.push_back(std::move(import));
    return new_index;
}

std::uint32_t fresh_local(const Module& module, FunctionDef& function, ValueKind kind) {
    const auto params = module.types.at(function.type_index).params.size();
    const auto index = static_cast<std::uint32_t>(params + function.locals.size());
    function.locals.push_back(kind);
    return index;
}

StackPointerRef find_stack_pointer(const Module& module, std::optional<std::string_view> override_name) {
    auto is_candidate = [](const Global& g) { return g.is_mutable && g.kind == ValueKind::i32; };

    if (override_name) {
        const auto index = module.find_global(*override_name);
        if (!index) throw TransformError("stack pointer override '" + std::string(*override_name) + "' names no global");
        if (!is_candidate(module.globals[*index])) {
            throw TransformError("stack pointer override '" + std::string(*override_name) +
                                 "' is not a mutable i32 global");
        }
        return {*index, module.globals[*index].name};
    }

    if (const auto named = module.find_global(kStackPointerName); named && is_candidate(module.globals[*named])) {
        return {*named, module.globals[*named].name};
    }

    std::vector<std::uint32_t> candidates;
    for (std::uint32_t i = 0; i < module.globals.size(); ++i) {
        if (is_candidate(module.globals[i])) candidates.push_back(i);
    }
    if (candidates.empty()) throw TransformError("no stack pointer found: module has no mutable i32 global");
    if (candidates.size() > 1) {
        throw TransformError("ambiguous stack pointer: " + std::to_string(candidates.size()) +
                             " mutable i32 globals; name one with --sp");
    }
    return {candidates.front(), module.globals[candidates.front()].name};
}

std::uint64_t CategoryCounts::total() const {
    std::uint64_t sum = 0;
    for (auto v : values) sum += v;
    return sum;
}

CategoryCounts& CategoryCounts::operator+=(const CategoryCounts& other) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
    return *this;
}

CategoryCounts count_categories(const std::vector<Instruction>& body) {
    CategoryCounts counts;
    for (const auto& instr : body) counts.add(instr);
    return counts;
}

std::vector<std::size_t> match_ends(const std::vector<Instruction>& body) {
    std::vector<std::size_t> ends(body.size(), body.size());
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < body.size(); ++i) {
        const auto op = body[i].op;
        if (op == Opcode::block || op == Opcode::loop) {
            open.push_back(i);
        } else if (op == Opcode::end) {
            if (open.empty()) throw Error("unbalanced body: 'end' at instruction " + std::to_string(i));
            ends[open.back()] = i;
            open.pop_back();
        }
    }
    if (!open.empty()) throw Error("unbalanced body: block at instruction " + std::to_string(open.back()) + " has no 'end'");
    return ends;
}

} // namespace protector
