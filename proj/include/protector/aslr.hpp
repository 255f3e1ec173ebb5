#pragma once

#include "protector/injection.hpp"

namespace protector {

/// Stack offset derived from a random draw: the top 6 bits scaled by 4,
/// i.e. one of the 64 aligned values in [0, 256).
constexpr std::uint32_t offset_from_random(std::uint32_t r) { return (r >> 26) << 2; }

inline constexpr std::uint32_t kAslrShift = 26;
inline constexpr std::uint32_t kAslrAlignShift = 2;

struct AslrLocals {
    std::uint32_t sp_save = 0;
};

// Logical shift (i32.shr_u) so the offset never goes negative and moves the
// stack pointer into the caller's frame.
Injection make_aslr_injection(const Module& module, FunctionDef& function, const StackPointerRef& sp,
                              const PrngSymbols& prng, bool emit_seed, AslrLocals* locals = nullptr);

AslrLocals inject_aslr(Module& module, std::uint32_t func, const StackPointerRef& sp, const PrngSymbols& prng);

} // namespace protector
