#include "support.hpp"

#include "protector/aslr.hpp"
#include "protector/prng.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace protector::test {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::uint32_t pick(std::mt19937& rng, std::uint32_t n) { return std::uniform_int_distribution<std::uint32_t>(0, n - 1)(rng); }
bool coin(std::mt19937& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

// Stack-neutral instruction soup over a function with `locals` i32 locals.
void random_body(std::mt19937& rng, const Module& m, FunctionDef& fn, std::uint32_t local_count, int depth,
                 std::vector<Instruction>& out) {
    const auto n = pick(rng, 6);
    for (std::uint32_t s = 0; s < n; ++s) {
        switch (pick(rng, 7)) {
        case 0:
            out.push_back(Instruction::i32_const(static_cast<std::int32_t>(rng())));
            out.push_back(Instruction::local_set(pick(rng, local_count)));
            break;
        case 1: {
            static constexpr Opcode binops[] = {Opcode::i32_add, Opcode::i32_sub, Opcode::i32_mul, Opcode::i32_and,
                                                Opcode::i32_or, Opcode::i32_xor, Opcode::i32_shl, Opcode::i32_shr_s,
                                                Opcode::i32_shr_u, Opcode::i32_eq, Opcode::i32_ne, Opcode::i32_lt_u,
                                                Opcode::i32_gt_u};
            out.push_back(Instruction::local_get(pick(rng, local_count)));
            out.push_back(Instruction::i32_const(static_cast<std::int32_t>(pick(rng, 1000))));
            out.push_back(Instruction::simple(binops[pick(rng, std::size(binops))]));
            out.push_back(Instruction::simple(Opcode::i32_eqz));
            out.push_back(Instruction::local_tee(pick(rng, local_count)));
            out.push_back(Instruction::simple(Opcode::drop));
            break;
        }
        case 2:
            if (!m.globals.empty()) {
                auto g = pick(rng, static_cast<std::uint32_t>(m.globals.size()));
                out.push_back(Instruction::global_get(g));
                if (m.globals[g].is_mutable) out.push_back(Instruction::global_set(g));
                else out.push_back(Instruction::simple(Opcode::drop));
            }
            break;
        case 3:
            if (m.memory) {
                auto st = Instruction::memory(coin(rng) ? Opcode::i32_store : Opcode::i32_store8, pick(rng, 64));
                if (st.op == Opcode::i32_store && coin(rng, 0.3)) st.mem.align = 1; // natural alignment prints as 0
                out.push_back(Instruction::i32_const(static_cast<std::int32_t>(pick(rng, 256))));
                out.push_back(Instruction::memory(Opcode::i32_load8_u, pick(rng, 16)));
                out.push_back(Instruction::simple(Opcode::memory_size));
                out.push_back(Instruction::simple(Opcode::i32_add));
                out.push_back(st);
            }
            break;
        case 4:
            if (depth < 3) {
                auto open = coin(rng) ? Instruction::block() : Instruction::loop();
                if (coin(rng, 0.4)) open.label = "$L" + std::to_string(depth) + "_" + std::to_string(out.size());
                out.push_back(open);
                random_body(rng, m, fn, local_count, depth + 1, out);
                out.push_back(Instruction::local_get(pick(rng, local_count)));
                out.push_back(Instruction::br_if(pick(rng, static_cast<std::uint32_t>(depth + 1))));
                out.push_back(Instruction::simple(Opcode::end));
            }
            break;
        case 5:
            out.push_back(Instruction::simple(Opcode::nop));
            break;
        default:
            if (m.function_count() > 0) {
                auto callee = pick(rng, static_cast<std::uint32_t>(m.function_count()));
                const auto& sig = m.signature_of(callee);
                for (std::size_t p = 0; p < sig.params.size(); ++p) out.push_back(Instruction::i32_const(1));
                out.push_back(Instruction::call(callee));
                if (sig.result) out.push_back(Instruction::simple(Opcode::drop));
            }
            break;
        }
    }
    (void)fn;
}

std::string ident(std::mt19937& rng, const std::string& prefix, std::size_t i) {
    static constexpr const char* tails[] = {"", "_x", ".y", "-z", "!", "'q"};
    return "$" + prefix + std::to_string(i) + tails[pick(rng, std::size(tails))];
}

} // namespace

Module random_module(std::mt19937& rng) {
    Module m;
    const auto ntypes = 1 + pick(rng, 3);
    for (std::uint32_t t = 0; t < ntypes; ++t) {
        FuncType ft;
        for (std::uint32_t p = pick(rng, 3); p > 0; --p) ft.params.push_back(ValueKind::i32);
        if (coin(rng)) ft.result = ValueKind::i32;
        if (coin(rng, 0.3)) ft.name = ident(rng, "t", t);
        m.types.push_back(ft);
    }
    if (coin(rng, 0.3)) {
        Import imp{"env", "time", intern_type(m, {}, ValueKind::i32), std::nullopt};
        if (coin(rng)) imp.name = "$host_time";
        m.imports.push_back(imp);
    }
    for (std::uint32_t g = pick(rng, 4); g > 0; --g) {
        Global gl;
        gl.is_mutable = coin(rng);
        gl.init = static_cast<std::int32_t>(rng());
        if (coin(rng)) gl.name = ident(rng, "g", m.globals.size());
        m.globals.push_back(gl);
    }
    if (coin(rng, 0.7)) {
        m.memory = Memory{Limits{1 + pick(rng, 2), coin(rng) ? std::optional<std::uint32_t>(4) : std::nullopt},
                          coin(rng) ? std::optional<std::string>("$mem") : std::nullopt};
    }
    const auto nfuncs = pick(rng, 5);
    for (std::uint32_t f = 0; f < nfuncs; ++f) {
        FunctionDef fn;
        fn.type_index = pick(rng, static_cast<std::uint32_t>(m.types.size()));
        if (coin(rng, 0.7)) fn.name = ident(rng, "f", f);
        m.functions.push_back(fn);
    }
    for (std::size_t f = 0; f < m.functions.size(); ++f) {
        auto& fn = m.functions[f];
        const auto& sig = m.types[fn.type_index];
        for (std::uint32_t l = 1 + pick(rng, 3); l > 0; --l) fn.locals.push_back(ValueKind::i32);
        const auto total = static_cast<std::uint32_t>(sig.params.size() + fn.locals.size());
        for (std::uint32_t l = 0; l < total; ++l) {
            if (coin(rng, 0.4)) fn.local_names[l] = "$l" + std::to_string(l);
        }
        random_body(rng, m, fn, total, 0, fn.body);
        if (sig.result) fn.body.push_back(Instruction::local_get(pick(rng, total)));
        if (coin(rng, 0.2)) {
            fn.body.push_back(Instruction::simple(Opcode::return_));
        }
    }
    if (!m.functions.empty() && coin(rng, 0.6)) {
        m.table = Table{Limits{4 + pick(rng, 4), std::nullopt}, coin(rng) ? std::optional<std::string>("$tbl") : std::nullopt};
        ElemSegment seg;
        seg.offset = ConstExpr::constant(static_cast<std::int32_t>(pick(rng, 2)));
        for (std::uint32_t e = 1 + pick(rng, 3); e > 0; --e) {
            seg.functions.push_back(static_cast<std::uint32_t>(m.imports.size()) +
                                    pick(rng, static_cast<std::uint32_t>(m.functions.size())));
        }
        m.elements.push_back(seg);
        // A call_indirect through a constant slot in the first function.
        auto& fn = m.functions.front();
        const auto ty = m.type_of(seg.functions.front());
        std::vector<Instruction> call;
        for (std::size_t p = 0; p < m.types[ty].params.size(); ++p) call.push_back(Instruction::i32_const(2));
        call.push_back(Instruction::i32_const(seg.offset.value));
        auto ci = Instruction::simple(Opcode::call_indirect);
        ci.index = ty;
        call.push_back(ci);
        if (m.types[ty].result) call.push_back(Instruction::simple(Opcode::drop));
        fn.body.insert(fn.body.begin(), call.begin(), call.end());
    }
    if (m.memory && coin(rng)) {
        DataSegment d;
        d.offset = ConstExpr::constant(static_cast<std::int32_t>(pick(rng, 4096)));
        for (std::uint32_t b = pick(rng, 24); b > 0; --b) d.bytes.push_back(static_cast<std::uint8_t>(rng()));
        m.data.push_back(d);
    }
    for (std::size_t f = 0; f < m.functions.size(); ++f) {
        if (coin(rng, 0.4)) {
            m.exports.push_back({"f" + std::to_string(f), ExternalKind::function,
                                 static_cast<std::uint32_t>(m.imports.size() + f)});
        }
    }
    if (m.memory && coin(rng)) m.exports.push_back({"memory", ExternalKind::memory, 0});
    if (!m.globals.empty() && coin(rng)) m.exports.push_back({"g \"0\"\n", ExternalKind::global, 0});
    return m;
}

Module random_exit_module(std::mt19937& rng, std::size_t functions) {
    Module m;
    const auto ty = intern_type(m, {ValueKind::i32}, ValueKind::i32);
    m.memory = Memory{Limits{1, std::nullopt}, std::nullopt};
    m.globals.push_back(Global{ValueKind::i32, true, 0, std::string("$acc")});

    for (std::size_t f = 0; f < functions; ++f) {
        FunctionDef fn;
        fn.type_index = ty;
        auto& body = fn.body;
        // Kinds of the open labels, outermost first; true for loops.
        std::vector<bool> open;
        auto emit_statements = [&](auto&& self, int budget) -> void {
            for (int s = 0; s < budget; ++s) {
                const auto depth = static_cast<std::uint32_t>(open.size());
                switch (pick(rng, 7)) {
                case 0: // guarded return
                    body.push_back(Instruction::block());
                    body.push_back(Instruction::local_get(0));
                    body.push_back(Instruction::i32_const(static_cast<std::int32_t>(pick(rng, 64))));
                    body.push_back(Instruction::simple(Opcode::i32_lt_u));
                    body.push_back(Instruction::br_if(0));
                    body.push_back(Instruction::local_get(0));
                    body.push_back(Instruction::i32_const(static_cast<std::int32_t>(rng())));
                    body.push_back(Instruction::simple(Opcode::i32_xor));
                    body.push_back(Instruction::simple(Opcode::return_));
                    body.push_back(Instruction::simple(Opcode::end));
                    break;
                case 1: // guarded branch to the function label, carrying the result
                    body.push_back(Instruction::block());
                    body.push_back(Instruction::local_get(0));
                    body.push_back(Instruction::i32_const(static_cast<std::int32_t>(pick(rng, 64))));
                    body.push_back(Instruction::simple(Opcode::i32_gt_u));
                    body.push_back(Instruction::br_if(0));
                    body.push_back(Instruction::global_get(0));
                    body.push_back(Instruction::br(depth + 1));
                    body.push_back(Instruction::simple(Opcode::end));
                    break;
                case 2: // branch out of an enclosing block (never a loop)
                    for (std::uint32_t d = 0; d < depth; ++d) {
                        if (!open[depth - 1 - d] && coin(rng)) {
                            body.push_back(Instruction::local_get(0));
                            body.push_back(Instruction::i32_const(3));
                            body.push_back(Instruction::simple(Opcode::i32_and));
                            body.push_back(Instruction::br_if(d));
                            break;
                        }
                    }
                    break;
                case 3:
                    if (depth < 4) {
                        open.push_back(false);
                        body.push_back(Instruction::block());
                        self(self, 1 + static_cast<int>(pick(rng, 3)));
                        body.push_back(Instruction::simple(Opcode::end));
                        open.pop_back();
                    }
                    break;
                case 4: // bounded loop with its own counter local
                    if (depth < 4) {
                        const auto counter = static_cast<std::uint32_t>(1 + fn.locals.size());
                        fn.locals.push_back(ValueKind::i32);
                        body.push_back(Instruction::i32_const(0));
                        body.push_back(Instruction::local_set(counter));
                        open.push_back(true);
                        body.push_back(Instruction::loop());
                        self(self, 1 + static_cast<int>(pick(rng, 2)));
                        body.push_back(Instruction::local_get(counter));
                        body.push_back(Instruction::i32_const(1));
                        body.push_back(Instruction::simple(Opcode::i32_add));
                        body.push_back(Instruction::local_tee(counter));
                        body.push_back(Instruction::i32_const(3));
                        body.push_back(Instruction::simple(Opcode::i32_lt_u));
                        body.push_back(Instruction::br_if(0));
                        body.push_back(Instruction::simple(Opcode::end));
                        open.pop_back();
                    }
                    break;
                case 5: // side effects
                    body.push_back(Instruction::i32_const(static_cast<std::int32_t>(pick(rng, 256)) * 4));
                    body.push_back(Instruction::local_get(0));
                    body.push_back(Instruction::memory(Opcode::i32_store, 1024));
                    body.push_back(Instruction::global_get(0));
                    body.push_back(Instruction::local_get(0));
                    body.push_back(Instruction::simple(Opcode::i32_add));
                    body.push_back(Instruction::global_set(0));
                    break;
                default: // call an earlier function (keeps recursion out)
                    if (f > 0) {
                        body.push_back(Instruction::local_get(0));
                        body.push_back(Instruction::i32_const(1));
                        body.push_back(Instruction::simple(Opcode::i32_add));
                        body.push_back(Instruction::call(pick(rng, static_cast<std::uint32_t>(f))));
                        body.push_back(Instruction::local_set(0));
                    }
                    break;
                }
            }
        };
        emit_statements(emit_statements, 2 + static_cast<int>(pick(rng, 5)));
        body.push_back(Instruction::local_get(0));
        m.functions.push_back(std::move(fn));
        m.exports.push_back({"f" + std::to_string(f), ExternalKind::function, static_cast<std::uint32_t>(f)});
    }
    return m;
}

std::string first_difference(const Module& a, const Module& b) {
    if (a.types != b.types) {
        for (std::size_t i = 0; i < std::min(a.types.size(), b.types.size()); ++i) {
            if (!(a.types[i] == b.types[i])) return "type " + std::to_string(i);
        }
        return "type count " + std::to_string(a.types.size()) + " vs " + std::to_string(b.types.size());
    }
    if (a.imports != b.imports) return "imports";
    if (a.functions.size() != b.functions.size()) return "function count";
    for (std::size_t f = 0; f < a.functions.size(); ++f) {
        const auto& x = a.functions[f];
        const auto& y = b.functions[f];
        const auto where = "function " + std::to_string(f);
        if (x.type_index != y.type_index) return where + " type index";
        if (x.locals != y.locals) return where + " locals";
        if (x.name != y.name) return where + " name";
        if (x.local_names != y.local_names) return where + " local names";
        for (std::size_t i = 0; i < std::min(x.body.size(), y.body.size()); ++i) {
            if (!(x.body[i] == y.body[i])) return where + " instruction " + std::to_string(i);
        }
        if (x.body.size() != y.body.size()) return where + " body length";
    }
    if (a.globals != b.globals) return "globals";
    if (a.memory != b.memory) return "memory";
    if (a.table != b.table) return "table";
    if (a.data != b.data) return "data";
    if (a.elements != b.elements) return "elements";
    if (a.exports != b.exports) return "exports";
    if (a.start != b.start) return "start";
    return {};
}

TransformResult protect(const Module& module, const std::string& mode) {
    if (mode == "none") return TransformResult{module, {}, std::nullopt, {}};
    return apply_passes(module, pass_config_for(mode));
}

CaseRun run_case(const CorpusCase& c, const Module& module, const std::vector<std::uint8_t>& input,
                 std::optional<std::uint32_t> time) {
    Instance instance(module, HostConfig{time.value_or(c.time)});
    instance.poke_input(c.input_addr, input);
    const auto sp = find_stack_pointer(module);
    CaseRun run;
    run.sp_before = instance.global(sp.global_index);
    run.result = instance.invoke(c.entry);
    run.sp_after = instance.global(sp.global_index);
    if (c.flag_global) run.flag = instance.exported_global(*c.flag_global);
    run.memory.assign(instance.memory().begin(), instance.memory().end());
    run.globals = instance.globals();
    return run;
}

std::vector<std::uint8_t> non_stack_memory(const CorpusCase& c, const std::vector<std::uint8_t>& memory) {
    std::vector<std::uint8_t> out(memory.begin(), memory.begin() + c.stack_region.first);
    out.insert(out.end(), memory.begin() + c.stack_region.second, memory.end());
    return out;
}

std::vector<std::uint32_t> user_globals(const Module& original, const std::vector<std::uint32_t>& globals) {
    const auto sp = find_stack_pointer(original);
    std::vector<std::uint32_t> out;
    for (std::uint32_t g = 0; g < original.globals.size(); ++g) {
        if (g != sp.global_index) out.push_back(globals.at(g));
    }
    return out;
}

std::optional<std::uint32_t> time_for_offset(std::uint32_t offset, std::uint32_t limit) {
    for (std::uint32_t t = 0; t < limit; ++t) {
        Xorshift32 rng(t);
        if (offset_from_random(rng.next()) == offset) return t;
    }
    return std::nullopt;
}

} // namespace protector::test
