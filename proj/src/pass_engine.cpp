#include "protector/pass_engine.hpp"

#include "protector/aslr.hpp"
#include "protector/canary.hpp"
#include "protector/error.hpp"
#include "protector/prng.hpp"

#include <chrono>

namespace protector {

std::set<std::string> default_skip_names() {
    return {"$stackAlloc", "$emscripten_stack_init", "$emscripten_stack_restore", "$emscripten_stack_get_current"};
}

std::vector<std::string> PassConfig::pass_names() const {
    std::vector<std::string> names;
    if (enable_table_shuffle) names.emplace_back("table_shuffle");
    if (enable_canary) names.emplace_back("canary");
    if (enable_aslr) names.emplace_back("aslr");
    return names;
}

CategoryCounts InsertionStats::totals() const {
    CategoryCounts sum;
    for (const auto& f : functions) sum += f.inserted;
    return sum;
}

const FunctionInsertion* InsertionStats::find(std::string_view name) const {
    for (const auto& f : functions) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

void wrap_body_for_epilogue(const Module& module, FunctionDef& function) {
    std::vector<Instruction> body;
    body.reserve(function.body.size() + 2);
    body.push_back(Instruction::block(module.types.at(function.type_index).result));
    std::uint32_t depth = 0;
    for (const auto& instr : function.body) {
        switch (instr.op) {
        case Opcode::block:
        case Opcode::loop:
            body.push_back(instr);
            ++depth;
            break;
        case Opcode::end:
            if (depth == 0) throw TransformError("unbalanced function body: stray 'end'");
            body.push_back(instr);
            --depth;
            break;
        case Opcode::return_:
            body.push_back(Instruction::br(depth));
            break;
        default:
            body.push_back(instr);
        }
    }
    if (depth != 0) throw TransformError("unbalanced function body: unclosed block");
    body.push_back(Instruction::simple(Opcode::end));
    function.body = std::move(body);
}

PassConfig pass_config_for(std::string_view mode) {
    PassConfig config;
    if (mode == "aslr" || mode == "both") config.enable_aslr = true;
    if (mode == "canary" || mode == "both") config.enable_canary = true;
    if (mode != "none" && !config.enable_aslr && !config.enable_canary) {
        throw Error("unknown pass mode \"" + std::string(mode) + "\" (expected none, aslr, canary or both)");
    }
    return config;
}

namespace {

std::uint32_t host_seed() {
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    return static_cast<std::uint32_t>(std::chrono::duration_cast<std::chrono::seconds>(now).count());
}

std::uint64_t count_tagged(const std::vector<Instruction>& code) {
    std::uint64_t n = 0;
    for (const auto& instr : code) n += instr.tag == InstrTag::canary_check ? 1 : 0;
    return n;
}

} // namespace

TransformResult apply_passes(Module module, const PassConfig& config) {
    if (!config.any_enabled()) throw TransformError("no pass enabled");

    TransformResult result;
    result.passes = config.pass_names();

    if (config.enable_table_shuffle) {
        Xorshift32 rng(config.seed.value_or(host_seed()));
        result.shuffle = shuffle_elem_segment(module, [&rng] { return rng.next(); },
                                              ShuffleOptions{config.pin_dynamic_partitions, config.strict_shuffle});
    }

    const auto original_defined = module.functions.size();
    std::vector<std::size_t> targets;
    if (config.enable_canary || config.enable_aslr) {
        for (std::size_t d = 0; d < module.functions.size(); ++d) {
            const auto& name = module.functions[d].name;
            if (name && config.skip_names.contains(*name)) continue;
            targets.push_back(d);
        }
    }

    std::vector<FunctionInsertion> inserted(original_defined);
    if (!targets.empty()) {
        const auto sp = find_stack_pointer(
            module, config.sp_override ? std::optional<std::string_view>(*config.sp_override) : std::nullopt);
        const auto prng = embed_prng(module);

        for (auto d : targets) {
            auto& function = module.functions[d];
            const auto func = static_cast<std::uint32_t>(module.imports.size() + d);
            refuse_self_instrumentation(module, func, prng);
            wrap_body_for_epilogue(module, function);

            Injection combined;
            if (config.enable_canary) {
                auto canary = make_canary_injection(module, function, sp, prng, true);
                combined.prologue.insert(combined.prologue.end(), canary.prologue.begin(), canary.prologue.end());
                combined.epilogue = std::move(canary.epilogue);
            }
            if (config.enable_aslr) {
                auto aslr = make_aslr_injection(module, function, sp, prng, !config.enable_canary);
                combined.prologue.insert(combined.prologue.end(), aslr.prologue.begin(), aslr.prologue.end());
                combined.epilogue.insert(combined.epilogue.begin(), aslr.epilogue.begin(), aslr.epilogue.end());
            }
            splice(function, combined);

            auto& stats = inserted[d];
            stats.inserted[Category::control] += 2; // wrapper block/end
            for (const auto* part : {&combined.prologue, &combined.epilogue}) {
                stats.inserted += count_categories(*part);
                stats.trap_path += count_tagged(*part);
            }
        }
    }

    for (std::size_t d = 0; d < module.functions.size(); ++d) {
        if (d >= original_defined) {
            FunctionInsertion whole;
            whole.inserted = count_categories(module.functions[d].body);
            inserted.push_back(whole);
        }
        inserted[d].function = static_cast<std::uint32_t>(module.imports.size() + d);
        inserted[d].name = module.display_name(inserted[d].function);
    }
    result.stats.functions = std::move(inserted);
    result.module = std::move(module);
    return result;
}

} // namespace protector
