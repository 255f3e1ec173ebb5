#include "protector/prng.hpp"

#include "protector/error.hpp"

#include <sstream>

namespace protector {

std::uint32_t xorshift32_step(std::uint32_t s) {
    if (s == 0) throw Error("xorshift32 state must be nonzero");
    s ^= s << 13;
    s ^= s >> 17;
    s ^= s << 5;
    return s;
}

namespace {

using I = Instruction;

// s = fmix32(param) ^ kSeedMix; s |= eqz(s) * kSeedMix
std::vector<Instruction> seed_body(std::uint32_t state) {
    auto xorshift_right = [](std::uint32_t amount) {
        return std::vector<Instruction>{I::local_get(0), I::local_get(0), I::i32_const_u(amount),
                                        I::simple(Opcode::i32_shr_u), I::simple(Opcode::i32_xor)};
    };
    std::vector<Instruction> body;
    auto append = [&body](std::vector<Instruction> part) { body.insert(body.end(), part.begin(), part.end()); };

    append(xorshift_right(16));
    body.push_back(I::local_set(0));
    append({I::local_get(0), I::i32_const_u(0x85EBCA6BU), I::simple(Opcode::i32_mul), I::local_set(0)});
    append(xorshift_right(13));
    body.push_back(I::local_set(0));
    append({I::local_get(0), I::i32_const_u(0xC2B2AE35U), I::simple(Opcode::i32_mul), I::local_set(0)});
    append(xorshift_right(16));
    append({I::i32_const_u(kSeedMix), I::simple(Opcode::i32_xor), I::global_set(state)});
    append({I::global_get(state), I::global_get(state), I::simple(Opcode::i32_eqz), I::i32_const_u(kSeedMix),
            I::simple(Opcode::i32_mul), I::simple(Opcode::i32_or), I::global_set(state)});
    return body;
}

std::vector<Instruction> rand_body(std::uint32_t state) {
    std::vector<Instruction> body;
    auto step = [&](Opcode shift, std::uint32_t amount) {
        body.insert(body.end(), {I::global_get(state), I::global_get(state), I::i32_const_u(amount),
                                 I::simple(shift), I::simple(Opcode::i32_xor), I::global_set(state)});
    };
    step(Opcode::i32_shl, 13);
    step(Opcode::i32_shr_u, 17);
    step(Opcode::i32_shl, 5);
    body.push_back(I::global_get(state));
    return body;
}

bool has_time_import(const Module& module) {
    for (const auto& imp : module.imports) {
        if (imp.module == kTimeModule && imp.field == kTimeField) return true;
    }
    return false;
}

} // namespace

PrngSymbols embed_prng(Module& module) {
    for (auto name : {kPrngStateName}) {
        if (module.find_global(name)) throw TransformError("cannot embed PRNG: symbol " + std::string(name) + " already exists");
    }
    for (auto name : {kSeedName, kRandName, kTimeName}) {
        if (module.find_function(name)) throw TransformError("cannot embed PRNG: symbol " + std::string(name) + " already exists");
    }
    if (has_time_import(module)) throw TransformError("cannot embed PRNG: module already imports env.time");

    PrngSymbols symbols;
    const auto time_type = intern_type(module, {}, ValueKind::i32);
    symbols.time_func = add_function_import(
        module, Import{std::string(kTimeModule), std::string(kTimeField), time_type, std::string(kTimeName)});

    symbols.state_global = static_cast<std::uint32_t>(module.globals.size());
    module.globals.push_back(Global{ValueKind::i32, true, 0, std::string(kPrngStateName)});

    const auto seed_type = intern_type(module, {ValueKind::i32}, std::nullopt);
    const auto rand_type = intern_type(module, {}, ValueKind::i32);

    symbols.seed_func = static_cast<std::uint32_t>(module.function_count());
    module.functions.push_back(FunctionDef{seed_type, {}, seed_body(symbols.state_global), std::string(kSeedName), {}});
    symbols.rand_func = static_cast<std::uint32_t>(module.function_count());
    module.functions.push_back(FunctionDef{rand_type, {}, rand_body(symbols.state_global), std::string(kRandName), {}});
    return symbols;
}

std::optional<PrngSymbols> find_prng(const Module& module) {
    const auto time = module.find_function(kTimeName);
    const auto seed = module.find_function(kSeedName);
    const auto rand = module.find_function(kRandName);
    const auto state = module.find_global(kPrngStateName);
    if (!time || !seed || !rand || !state) return std::nullopt;
    return PrngSymbols{*time, *seed, *rand, *state};
}

std::string emit_host_glue(const Module& module, std::optional<std::uint32_t> fixed_time) {
    if (!has_time_import(module)) throw TransformError("module does not import env.time; nothing to glue");
    for (const auto& imp : module.imports) {
        if (imp.module != kTimeModule || imp.field != kTimeField) {
            throw TransformError("no host implementation for import \"" + imp.module + "\" \"" + imp.field + "\"");
        }
    }

    std::ostringstream out;
    out << "// Host import object for a hardened module.\n"
        << "// env.time returns epoch seconds as a 32-bit integer"
        << (fixed_time ? " (fixed for reproducible runs).\n" : ".\n");
    if (fixed_time) {
        out << "const fixedTime = " << *fixed_time << ";\n";
    } else {
        out << "const fixedTime = null;\n";
    }
    out << "\n"
        << "const importObject = {\n"
        << "  \"env\": {\n"
        << "    \"time\": () => (fixedTime === null ? Math.floor(Date.now() / 1000) : fixedTime) | 0,\n"
        << "  },\n"
        << "};\n"
        << "\n"
        << "module.exports = { importObject };\n";
    return out.str();
}

} // namespace protector

namespace protector {

std::vector<Instruction> seed_from_time(const PrngSymbols& prng) {
    return {Instruction::call(prng.time_func), Instruction::call(prng.seed_func)};
}

} // namespace protector
