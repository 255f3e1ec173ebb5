#pragma once

#include "protector/ir.hpp"
#include "protector/prng.hpp"

#include <vector>

namespace protector {

/// Code one pass adds around a wrapped function body.
struct Injection {
    std::vector<Instruction> prologue;
    std::vector<Instruction> epilogue;
};

/// True when `body` is a single block spanning the whole function, as produced
/// by wrap_body_for_epilogue.
bool is_wrapped(const std::vector<Instruction>& body);

/// Throws TransformError when `func` is one of the embedded PRNG or time functions.
void refuse_self_instrumentation(const Module& module, std::uint32_t func, const PrngSymbols& prng);

/// Places `injection` around an already wrapped body: prologue first, epilogue last.
void splice(FunctionDef& function, const Injection& injection);

} // namespace protector
