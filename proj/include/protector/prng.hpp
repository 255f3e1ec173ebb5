#pragma once

#include "protector/ir.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace protector {

inline constexpr std::string_view kPrngStateName = "$__prng_state";
inline constexpr std::string_view kSeedName = "$__seed";
inline constexpr std::string_view kRandName = "$__rand";
inline constexpr std::string_view kTimeName = "$__time";
inline constexpr std::string_view kTimeModule = "env";
inline constexpr std::string_view kTimeField = "time";

/// Seed mixing constant; also the forced state when a seed maps to zero.
inline constexpr std::uint32_t kSeedMix = 0x9E3779B9U;

/// One xorshift32 step. Throws Error for the excluded fixed point 0.
std::uint32_t xorshift32_step(std::uint32_t state);

/// murmur3 32-bit finalizer; a bijection with fmix32(0) == 0.
constexpr std::uint32_t fmix32(std::uint32_t h) {
    h ^= h >> 16;
    h *= 0x85EBCA6BU;
    h ^= h >> 13;
    h *= 0xC2B2AE35U;
    h ^= h >> 16;
    return h;
}

/// State produced by `$__seed(seed)`: fmix32(seed) ^ kSeedMix, never zero.
constexpr std::uint32_t seed_state(std::uint32_t seed) {
    const std::uint32_t s = fmix32(seed) ^ kSeedMix;
    return s == 0 ? kSeedMix : s;
}

/// Host-side mirror of the embedded generator.
class Xorshift32 {
  public:
    explicit Xorshift32(std::uint32_t seed) : state_(seed_state(seed)) {}
    std::uint32_t next() { return state_ = xorshift32_step(state_); }
    [[nodiscard]] std::uint32_t state() const { return state_; }

  private:
    std::uint32_t state_;
};

/// Indices of the pieces `embed_prng` added.
struct PrngSymbols {
    std::uint32_t time_func = 0;
    std::uint32_t seed_func = 0;
    std::uint32_t rand_func = 0;
    std::uint32_t state_global = 0;

    friend bool operator==(const PrngSymbols&, const PrngSymbols&) = default;
};

/// Adds the `env.time` import, the `$__prng_state` global and the `$__seed` /
/// `$__rand` functions. Throws TransformError if any of them already exists.
PrngSymbols embed_prng(Module& module);

/// Locates previously embedded PRNG symbols, if all are present.
std::optional<PrngSymbols> find_prng(const Module& module);

/// JavaScript import object providing every import of `module`. With
/// `fixed_time`, `env.time` always returns that value.
std::string emit_host_glue(const Module& module, std::optional<std::uint32_t> fixed_time = std::nullopt);

} // namespace protector

namespace protector {

/// `call $__time; call $__seed`: reseeds the generator from the host clock.
std::vector<Instruction> seed_from_time(const PrngSymbols& prng);

} // namespace protector
