#include "protector/wat.hpp"

#include <sstream>

namespace protector::wat {

namespace {

std::string quote(const std::vector<std::uint8_t>& bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out = "\"";
    for (auto b : bytes) {
        if (b >= 0x20 && b < 0x7f && b != '"' && b != '\\') {
            out.push_back(static_cast<char>(b));
        } else {
            out.push_back('\\');
            out.push_back(kHex[b >> 4]);
            out.push_back(kHex[b & 0xf]);
        }
    }
    out.push_back('"');
    return out;
}

std::string quote(const std::string& s) { return quote(std::vector<std::uint8_t>(s.begin(), s.end())); }

std::string func_ref(const Module& m, std::uint32_t f) {
    if (auto name = m.function_name(f)) return *name;
    return std::to_string(f);
}

std::string global_ref(const Module& m, std::uint32_t g) {
    if (g < m.globals.size() && m.globals[g].name) return *m.globals[g].name;
    return std::to_string(g);
}

std::string type_ref(const Module& m, std::uint32_t t) {
    if (t < m.types.size() && m.types[t].name) return *m.types[t].name;
    return std::to_string(t);
}

std::string const_expr(const Module& m, const ConstExpr& e) {
    if (e.is_constant()) return "(i32.const " + std::to_string(e.value) + ")";
    return "(global.get " + global_ref(m, static_cast<std::uint32_t>(e.value)) + ")";
}

std::string signature_tail(const FuncType& t) {
    std::string out;
    if (!t.params.empty()) {
        out += " (param";
        for (auto k : t.params) out += " " + std::string(to_string(k));
        out += ")";
    }
    if (t.result) out += " (result " + std::string(to_string(*t.result)) + ")";
    return out;
}

std::string limits(const Limits& l) {
    std::string out = std::to_string(l.min);
    if (l.max) out += " " + std::to_string(*l.max);
    return out;
}

std::string instruction_text(const Module& m, const FunctionDef* fn, const Instruction& instr) {
    const auto& meta = info(instr.op);
    std::string out(meta.mnemonic);
    switch (meta.immediate) {
    case ImmediateKind::none:
        break;
    case ImmediateKind::i32_value:
        out += " " + std::to_string(instr.value);
        break;
    case ImmediateKind::local:
        if (fn) {
            if (auto it = fn->local_names.find(instr.index); it != fn->local_names.end()) {
                out += " " + it->second;
                break;
            }
        }
        out += " " + std::to_string(instr.index);
        break;
    case ImmediateKind::global:
        out += " " + global_ref(m, instr.index);
        break;
    case ImmediateKind::label:
        out += " " + std::to_string(instr.index);
        break;
    case ImmediateKind::function:
        out += " " + func_ref(m, instr.index);
        break;
    case ImmediateKind::type:
        out += " (type " + type_ref(m, instr.index) + ")";
        break;
    case ImmediateKind::memarg:
        if (instr.mem.offset != 0) out += " offset=" + std::to_string(instr.mem.offset);
        if (instr.mem.align != 0) out += " align=" + std::to_string(instr.mem.align);
        break;
    case ImmediateKind::block:
        if (instr.label) out += " " + *instr.label;
        if (instr.block_result) out += " (result " + std::string(to_string(*instr.block_result)) + ")";
        break;
    }
    return out;
}

} // namespace

std::string print_instruction(const Module& module, const Instruction& instr) {
    return instruction_text(module, nullptr, instr);
}

std::string print_module(const Module& m) {
    std::ostringstream out;
    out << "(module";

    for (std::uint32_t i = 0; i < m.types.size(); ++i) {
        const auto& t = m.types[i];
        out << "\n  (type " << (t.name ? *t.name + " " : "") << "(;" << i << ";) (func" << signature_tail(t) << "))";
    }
    for (std::uint32_t i = 0; i < m.imports.size(); ++i) {
        const auto& imp = m.imports[i];
        out << "\n  (import " << quote(imp.module) << " " << quote(imp.field) << " (func "
            << (imp.name ? *imp.name + " " : "") << "(;" << i << ";) (type " << type_ref(m, imp.type_index) << ")"
            << signature_tail(m.types.at(imp.type_index)) << "))";
    }
    for (std::uint32_t d = 0; d < m.functions.size(); ++d) {
        const auto& fn = m.functions[d];
        const auto& sig = m.types.at(fn.type_index);
        const auto index = static_cast<std::uint32_t>(m.imports.size()) + d;
        out << "\n  (func " << (fn.name ? *fn.name + " " : "") << "(;" << index << ";) (type "
            << type_ref(m, fn.type_index) << ")";
        std::uint32_t local = 0;
        for (auto kind : sig.params) {
            out << " (param ";
            if (auto it = fn.local_names.find(local); it != fn.local_names.end()) out << it->second << " ";
            out << to_string(kind) << ")";
            ++local;
        }
        if (sig.result) out << " (result " << to_string(*sig.result) << ")";
        for (auto kind : fn.locals) {
            out << "\n    (local ";
            if (auto it = fn.local_names.find(local); it != fn.local_names.end()) out << it->second << " ";
            out << to_string(kind) << ")";
            ++local;
        }
        std::size_t depth = 0;
        for (const auto& instr : fn.body) {
            if (instr.op == Opcode::end && depth > 0) --depth;
            out << "\n    " << std::string(depth * 2, ' ') << instruction_text(m, &fn, instr);
            if (instr.op == Opcode::block || instr.op == Opcode::loop) ++depth;
        }
        out << ")";
    }
    if (m.table) {
        out << "\n  (table " << (m.table->name ? *m.table->name + " " : "") << limits(m.table->size) << " funcref)";
    }
    if (m.memory) {
        out << "\n  (memory " << (m.memory->name ? *m.memory->name + " " : "") << limits(m.memory->pages) << ")";
    }
    for (std::uint32_t i = 0; i < m.globals.size(); ++i) {
        const auto& g = m.globals[i];
        out << "\n  (global " << (g.name ? *g.name + " " : "") << "(;" << i << ";) ";
        if (g.is_mutable) out << "(mut " << to_string(g.kind) << ")";
        else out << to_string(g.kind);
        out << " (i32.const " << g.init << "))";
    }
    for (const auto& e : m.exports) {
        std::string ref;
        switch (e.kind) {
        case ExternalKind::function: ref = func_ref(m, e.index); break;
        case ExternalKind::global: ref = global_ref(m, e.index); break;
        case ExternalKind::memory: ref = m.memory && m.memory->name ? *m.memory->name : std::to_string(e.index); break;
        case ExternalKind::table: ref = m.table && m.table->name ? *m.table->name : std::to_string(e.index); break;
        }
        out << "\n  (export " << quote(e.name) << " (" << to_string(e.kind) << " " << ref << "))";
    }
    if (m.start) out << "\n  (start " << func_ref(m, *m.start) << ")";
    for (const auto& seg : m.elements) {
        out << "\n  (elem " << const_expr(m, seg.offset) << " func";
        for (auto f : seg.functions) out << " " << func_ref(m, f);
        out << ")";
    }
    for (const auto& seg : m.data) {
        out << "\n  (data " << const_expr(m, seg.offset) << " " << quote(seg.bytes) << ")";
    }
    out << ")";
    if (m.types.empty() && m.imports.empty() && m.functions.empty() && !m.table && !m.memory && m.globals.empty() &&
        m.exports.empty() && !m.start && m.elements.empty() && m.data.empty()) {
        return "(module)";
    }
    out << "\n";
    return out.str();
}

} // namespace protector::wat
