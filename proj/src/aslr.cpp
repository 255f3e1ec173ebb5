#include "protector/aslr.hpp"

#include "protector/error.hpp"

namespace protector {

namespace {
using I = Instruction;
}

Injection make_aslr_injection(const Module& module, FunctionDef& function, const StackPointerRef& sp,
                              const PrngSymbols& prng, bool emit_seed, AslrLocals* locals) {
    AslrLocals l;
    l.sp_save = fresh_local(module, function, ValueKind::i32);
    if (locals) *locals = l;

    Injection out;
    if (emit_seed) out.prologue = seed_from_time(prng);
    out.prologue.insert(out.prologue.end(), {
        I::global_get(sp.global_index),
        I::local_set(l.sp_save),
        I::global_get(sp.global_index),
        I::call(prng.rand_func),
        I::i32_const(kAslrShift),
        I::simple(Opcode::i32_shr_u),
        I::i32_const(kAslrAlignShift),
        I::simple(Opcode::i32_shl),
        I::simple(Opcode::i32_sub),
        I::global_set(sp.global_index),
    });
    out.epilogue = {I::local_get(l.sp_save), I::global_set(sp.global_index)};
    return out;
}

AslrLocals inject_aslr(Module& module, std::uint32_t func, const StackPointerRef& sp, const PrngSymbols& prng) {
    refuse_self_instrumentation(module, func, prng);
    auto& function = module.functions.at(func - module.imports.size());
    if (!is_wrapped(function.body)) throw TransformError("function " + module.display_name(func) + " is not wrapped for epilogue injection");
    AslrLocals locals;
    splice(function, make_aslr_injection(module, function, sp, prng, true, &locals));
    return locals;
}

} // namespace protector
