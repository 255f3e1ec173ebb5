#include "protector/canary.hpp"

#include "protector/error.hpp"

namespace protector {

namespace {

using I = Instruction;

constexpr std::int32_t kCanarySize = 4;

} // namespace

Injection make_canary_injection(const Module& module, FunctionDef& function, const StackPointerRef& sp,
                                const PrngSymbols& prng, bool emit_seed, CanaryLocals* locals) {
    CanaryLocals l;
    l.value = fresh_local(module, function, ValueKind::i32);
    l.address = fresh_local(module, function, ValueKind::i32);
    if (locals) *locals = l;

    Injection out;
    if (emit_seed) out.prologue = seed_from_time(prng);
    out.prologue.insert(out.prologue.end(), {
        I::call(prng.rand_func),
        I::local_set(l.value),
        I::global_get(sp.global_index),
        I::i32_const(kCanarySize),
        I::simple(Opcode::i32_sub),
        I::local_set(l.address),
        I::local_get(l.address),
        I::local_get(l.value),
        I::memory(Opcode::i32_store),
        I::local_get(l.address),
        I::global_set(sp.global_index),
    });

    Instruction trap = I::simple(Opcode::unreachable);
    trap.tag = InstrTag::canary_check;
    out.epilogue = {
        I::block(),
        I::local_get(l.address),
        I::memory(Opcode::i32_load),
        I::local_get(l.value),
        I::simple(Opcode::i32_eq),
        I::br_if(0),
        trap,
        I::simple(Opcode::end),
        I::global_get(sp.global_index),
        I::i32_const(kCanarySize),
        I::simple(Opcode::i32_add),
        I::global_set(sp.global_index),
    };
    return out;
}

CanaryLocals inject_canary(Module& module, std::uint32_t func, const StackPointerRef& sp, const PrngSymbols& prng) {
    refuse_self_instrumentation(module, func, prng);
    auto& function = module.functions.at(func - module.imports.size());
    if (!is_wrapped(function.body)) throw TransformError("function " + module.display_name(func) + " is not wrapped for epilogue injection");
    CanaryLocals locals;
    splice(function, make_canary_injection(module, function, sp, prng, true, &locals));
    return locals;
}

std::size_t tag_canary_checks(Module& module) {
    static constexpr std::array<Opcode, 8> kShape{Opcode::block, Opcode::local_get, Opcode::i32_load,
                                                  Opcode::local_get, Opcode::i32_eq, Opcode::br_if,
                                                  Opcode::unreachable, Opcode::end};
    std::size_t tagged = 0;
    for (auto& fn : module.functions) {
        auto& body = fn.body;
        for (std::size_t i = 0; i + kShape.size() <= body.size(); ++i) {
            bool match = true;
            for (std::size_t k = 0; k < kShape.size() && match; ++k) match = body[i + k].op == kShape[k];
            if (!match) continue;
            if (body[i].block_result || body[i + 2].mem != MemArg{} || body[i + 5].index != 0) continue;
            body[i + 6].tag = InstrTag::canary_check;
            ++tagged;
        }
    }
    return tagged;
}

} // namespace protector
