#include "protector/injection.hpp"

#include "protector/error.hpp"

namespace protector {

bool is_wrapped(const std::vector<Instruction>& body) {
    if (body.size() < 2 || body.front().op != Opcode::block) return false;
    try {
        return match_ends(body).front() == body.size() - 1;
    } catch (const Error&) {
        return false;
    }
}

void refuse_self_instrumentation(const Module& module, std::uint32_t func, const PrngSymbols& prng) {
    const auto name = module.function_name(func);
    const bool reserved = name && (*name == kSeedName || *name == kRandName || *name == kTimeName);
    if (reserved || func == prng.seed_func || func == prng.rand_func || func == prng.time_func) {
        throw TransformError("refusing to instrument PRNG support function " + module.display_name(func));
    }
    if (module.is_import(func)) throw TransformError("cannot instrument imported function " + module.display_name(func));
}

void splice(FunctionDef& function, const Injection& injection) {
    std::vector<Instruction> body;
    body.reserve(injection.prologue.size() + function.body.size() + injection.epilogue.size());
    body.insert(body.end(), injection.prologue.begin(), injection.prologue.end());
    body.insert(body.end(), function.body.begin(), function.body.end());
    body.insert(body.end(), injection.epilogue.begin(), injection.epilogue.end());
    function.body = std::move(body);
}

} // namespace protector
