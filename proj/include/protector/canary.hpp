#pragma once

#include "protector/injection.hpp"

namespace protector {

struct CanaryLocals {
    std::uint32_t value = 0;   // canary value, kept on the managed stack
    std::uint32_t address = 0; // linear-memory slot holding the copy
};

/// Builds the canary prologue and verification epilogue for `function`,
/// allocating its two locals. The prologue draws a value, moves the stack
/// pointer down by 4 and stores the value at the new stack pointer; the
/// epilogue compares the slot against the local, hits `unreachable` on a
/// mismatch and otherwise releases the slot.
Injection make_canary_injection(const Module& module, FunctionDef& function, const StackPointerRef& sp,
                                const PrngSymbols& prng, bool emit_seed, CanaryLocals* locals = nullptr);

/// Instruments one wrapped, defined function in place.
CanaryLocals inject_canary(Module& module, std::uint32_t func, const StackPointerRef& sp, const PrngSymbols& prng);

/// Re-tags the `unreachable` of every injected verification block so the
/// interpreter reports CanaryMismatch for modules read back from text.
/// Returns the number of blocks tagged.
std::size_t tag_canary_checks(Module& module);

} // namespace protector
