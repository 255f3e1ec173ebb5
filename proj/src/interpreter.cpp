#include "protector/interpreter.hpp"

#include "protector/error.hpp"

#include <array>
#include <chrono>

namespace protector {

namespace {

constexpr std::array<std::string_view, 6> kTrapNames{"Unreachable",         "CanaryMismatch",    "OutOfBoundsMemory",
                                                     "UndefinedTableEntry", "SignatureMismatch", "StackExhausted"};

struct Trap {
    TrapReason reason;
};

std::uint32_t eval_offset(const ConstExpr& e, const std::vector<std::uint32_t>& globals) {
    if (e.is_constant()) return static_cast<std::uint32_t>(e.value);
    return globals.at(static_cast<std::uint32_t>(e.value));
}

} // namespace

std::string_view to_string(TrapReason reason) { return kTrapNames.at(static_cast<std::size_t>(reason)); }

std::optional<TrapReason> parse_trap_reason(std::string_view text) {
    for (std::size_t i = 0; i < kTrapNames.size(); ++i) {
        if (kTrapNames[i] == text) return static_cast<TrapReason>(i);
    }
    return std::nullopt;
}

Instance::Instance(Module module, HostConfig host) : module_(std::move(module)), host_(host) {
    for (const auto& imp : module_.imports) {
        const auto& sig = module_.types.at(imp.type_index);
        if (imp.module != "env" || imp.field != "time") {
            throw LinkError("unknown import \"" + imp.module + "\" \"" + imp.field + "\"");
        }
        if (!sig.params.empty() || sig.result != ValueKind::i32) {
            throw LinkError("import env.time must have type () -> i32");
        }
    }

    for (const auto& g : module_.globals) globals_.push_back(static_cast<std::uint32_t>(g.init));
    if (module_.memory) memory_.assign(static_cast<std::size_t>(module_.memory->pages.min) * kPageSize, 0);
    if (module_.table) table_.assign(module_.table->size.min, std::nullopt);

    for (const auto& fn : module_.functions) {
        try {
            ends_.push_back(match_ends(fn.body));
        } catch (const Error& e) {
            throw LinkError(e.what());
        }
    }

    for (const auto& seg : module_.data) {
        const std::uint64_t base = eval_offset(seg.offset, globals_);
        if (base + seg.bytes.size() > memory_.size()) throw LinkError("data segment out of bounds");
        std::copy(seg.bytes.begin(), seg.bytes.end(), memory_.begin() + static_cast<std::ptrdiff_t>(base));
    }
    for (const auto& seg : module_.elements) {
        const std::uint64_t base = eval_offset(seg.offset, globals_);
        if (base + seg.functions.size() > table_.size()) throw LinkError("element segment out of bounds");
        for (std::size_t k = 0; k < seg.functions.size(); ++k) table_[base + k] = seg.functions[k];
    }

    if (module_.start) {
        const auto r = invoke_function(*module_.start);
        if (r.trapped()) throw LinkError("start function trapped: " + std::string(to_string(r.trap())));
    }
}

void Instance::poke_input(std::uint32_t address, std::span<const std::uint8_t> bytes) {
    if (address >= memory_.size() || static_cast<std::uint64_t>(address) + bytes.size() > memory_.size()) {
        throw HarnessError("poke_input out of bounds: " + std::to_string(bytes.size()) + " bytes at " + std::to_string(address));
    }
    std::copy(bytes.begin(), bytes.end(), memory_.begin() + address);
}

std::vector<std::uint8_t> Instance::read_memory(std::uint32_t address, std::size_t length) const {
    if (static_cast<std::uint64_t>(address) + length > memory_.size()) throw HarnessError("read_memory out of bounds");
    return {memory_.begin() + address, memory_.begin() + static_cast<std::ptrdiff_t>(address + length)};
}

std::uint32_t Instance::exported_global(std::string_view name) const {
    const auto* e = module_.find_export(name, ExternalKind::global);
    if (!e) throw HarnessError("no exported global \"" + std::string(name) + "\"");
    return globals_.at(e->index);
}

RunResult Instance::invoke(std::string_view export_name, std::span<const std::uint32_t> args) {
    const auto* e = module_.find_export(export_name, ExternalKind::function);
    if (!e) throw HarnessError("no exported function \"" + std::string(export_name) + "\"");
    return invoke_function(e->index, args);
}

struct Instance::Impl {
    struct Label {
        std::size_t height;
        std::size_t continuation;
        std::uint32_t arity;
        bool is_loop;
    };

    struct Frame {
        std::uint32_t defined;
        std::vector<std::uint32_t> locals;
        std::size_t pc = 0;
        std::size_t label_base;
        std::size_t stack_base;
        std::uint32_t arity;
    };

    Instance& self;
    ExecutionCounters counters;
    std::vector<std::uint32_t> stack;
    std::vector<Label> labels;
    std::vector<Frame> frames;

    std::uint32_t pop() {
        if (stack.empty() || (!frames.empty() && stack.size() <= frames.back().stack_base)) {
            throw Error("malformed code: operand stack underflow");
        }
        const auto v = stack.back();
        stack.pop_back();
        return v;
    }

    void push(std::uint32_t v) { stack.push_back(v); }

    std::uint32_t host_time() const {
        if (self.host_.fixed_time) return *self.host_.fixed_time;
        const auto now = std::chrono::system_clock::now().time_since_epoch();
        return static_cast<std::uint32_t>(std::chrono::duration_cast<std::chrono::seconds>(now).count());
    }

    std::uint64_t effective(std::uint32_t base, const MemArg& mem, std::size_t width) const {
        const std::uint64_t addr = static_cast<std::uint64_t>(base) + mem.offset;
        if (addr + width > self.memory_.size()) throw Trap{TrapReason::out_of_bounds_memory};
        return addr;
    }

    void enter(std::uint32_t func) {
        auto& m = self.module_;
        if (func >= counters.calls.size()) throw Error("call to invalid function index");
        const auto& sig = m.signature_of(func);
        if (!m.is_import(func) && frames.size() >= kMaxCallDepth) throw Trap{TrapReason::stack_exhausted};
        ++counters.calls[func];
        if (m.is_import(func)) {
            for (std::size_t i = 0; i < sig.params.size(); ++i) pop();
            push(host_time());
            return;
        }
        const auto defined = static_cast<std::uint32_t>(func - m.imports.size());
        const auto& fn = m.functions[defined];
        std::vector<std::uint32_t> locals(sig.params.size() + fn.locals.size(), 0);
        for (std::size_t i = sig.params.size(); i-- > 0;) locals[i] = pop();
        frames.push_back(Frame{defined, std::move(locals), 0, labels.size(), stack.size(), sig.result ? 1U : 0U});
    }

    void leave() {
        Frame& f = frames.back();
        if (stack.size() < f.stack_base + f.arity) throw Error("malformed code: missing return value");
        std::vector<std::uint32_t> results(stack.end() - f.arity, stack.end());
        stack.resize(f.stack_base);
        stack.insert(stack.end(), results.begin(), results.end());
        labels.resize(f.label_base);
        frames.pop_back();
    }

    void branch(std::uint32_t depth) {
        Frame& f = frames.back();
        const auto open = labels.size() - f.label_base;
        if (depth == open) {
            leave();
            return;
        }
        if (depth > open) throw Error("malformed code: branch depth out of range");
        const auto target_index = labels.size() - 1 - depth;
        const Label target = labels[target_index];
        if (stack.size() < target.height + target.arity) throw Error("malformed code: branch arity");
        std::vector<std::uint32_t> carried(stack.end() - target.arity, stack.end());
        stack.resize(target.height);
        stack.insert(stack.end(), carried.begin(), carried.end());
        labels.resize(target_index + 1);
        // Blocks resume at their `end`, which then executes (and is counted) normally.
        f.pc = target.continuation;
    }

    void run_to_completion() {
        auto& m = self.module_;
        while (!frames.empty()) {
            Frame& f = frames.back();
            const auto& body = m.functions[f.defined].body;
            if (f.pc >= body.size()) {
                leave();
                continue;
            }
            const std::size_t pc = f.pc++;
            const Instruction& in = body[pc];
            counters.executed.add(in);
            execute(f, pc, in);
        }
    }

    void execute(Frame& f, std::size_t pc, const Instruction& in) {
        auto& m = self.module_;
        auto binary = [this](auto op) {
            const auto b = pop();
            const auto a = pop();
            push(static_cast<std::uint32_t>(op(a, b)));
        };
        switch (in.op) {
        case Opcode::i32_const: push(static_cast<std::uint32_t>(in.value)); break;
        case Opcode::i32_add: binary([](std::uint32_t a, std::uint32_t b) { return a + b; }); break;
        case Opcode::i32_sub: binary([](std::uint32_t a, std::uint32_t b) { return a - b; }); break;
        case Opcode::i32_mul: binary([](std::uint32_t a, std::uint32_t b) { return a * b; }); break;
        case Opcode::i32_and: binary([](std::uint32_t a, std::uint32_t b) { return a & b; }); break;
        case Opcode::i32_or: binary([](std::uint32_t a, std::uint32_t b) { return a | b; }); break;
        case Opcode::i32_xor: binary([](std::uint32_t a, std::uint32_t b) { return a ^ b; }); break;
        case Opcode::i32_shl: binary([](std::uint32_t a, std::uint32_t b) { return a << (b & 31); }); break;
        case Opcode::i32_shr_u: binary([](std::uint32_t a, std::uint32_t b) { return a >> (b & 31); }); break;
        case Opcode::i32_shr_s:
            binary([](std::uint32_t a, std::uint32_t b) {
                return static_cast<std::uint32_t>(static_cast<std::int32_t>(a) >> (b & 31));
            });
            break;
        case Opcode::i32_eq: binary([](std::uint32_t a, std::uint32_t b) { return a == b; }); break;
        case Opcode::i32_ne: binary([](std::uint32_t a, std::uint32_t b) { return a != b; }); break;
        case Opcode::i32_lt_u: binary([](std::uint32_t a, std::uint32_t b) { return a < b; }); break;
        case Opcode::i32_gt_u: binary([](std::uint32_t a, std::uint32_t b) { return a > b; }); break;
        case Opcode::i32_eqz: push(pop() == 0 ? 1 : 0); break;

        case Opcode::local_get: push(f.locals.at(in.index)); break;
        case Opcode::local_set: f.locals.at(in.index) = pop(); break;
        case Opcode::local_tee: {
            const auto v = pop();
            f.locals.at(in.index) = v;
            push(v);
            break;
        }
        case Opcode::global_get: push(self.globals_.at(in.index)); break;
        case Opcode::global_set: self.globals_.at(in.index) = pop(); break;

        case Opcode::i32_load: {
            const auto addr = effective(pop(), in.mem, 4);
            std::uint32_t v = 0;
            for (int k = 3; k >= 0; --k) v = (v << 8) | self.memory_[addr + static_cast<std::size_t>(k)];
            push(v);
            break;
        }
        case Opcode::i32_load8_u: push(self.memory_[effective(pop(), in.mem, 1)]); break;
        case Opcode::i32_store: {
            const auto v = pop();
            const auto addr = effective(pop(), in.mem, 4);
            for (std::size_t k = 0; k < 4; ++k) self.memory_[addr + k] = static_cast<std::uint8_t>(v >> (8 * k));
            break;
        }
        case Opcode::i32_store8: {
            const auto v = pop();
            self.memory_[effective(pop(), in.mem, 1)] = static_cast<std::uint8_t>(v);
            break;
        }
        case Opcode::memory_size: push(static_cast<std::uint32_t>(self.memory_.size() / kPageSize)); break;

        case Opcode::block:
            labels.push_back({stack.size(), self.ends_[f.defined][pc], in.block_result ? 1U : 0U, false});
            break;
        case Opcode::loop:
            labels.push_back({stack.size(), pc + 1, 0, true});
            break;
        case Opcode::end:
            if (labels.size() > f.label_base) labels.pop_back();
            break;
        case Opcode::br: branch(in.index); break;
        case Opcode::br_if:
            if (pop() != 0) branch(in.index);
            break;
        case Opcode::return_: leave(); break;
        case Opcode::unreachable:
            throw Trap{in.tag == InstrTag::canary_check ? TrapReason::canary_mismatch : TrapReason::unreachable};
        case Opcode::nop: break;
        case Opcode::drop: pop(); break;
        case Opcode::call: enter(in.index); break;
        case Opcode::call_indirect: {
            const auto slot = pop();
            if (slot >= self.table_.size() || !self.table_[slot]) throw Trap{TrapReason::undefined_table_entry};
            const auto target = *self.table_[slot];
            if (!m.signature_of(target).same_signature(m.types.at(in.index))) throw Trap{TrapReason::signature_mismatch};
            enter(target);
            break;
        }
        }
    }
};

RunResult Instance::invoke_function(std::uint32_t func, std::span<const std::uint32_t> args) {
    if (func >= module_.function_count()) throw HarnessError("function index out of range");
    const auto& sig = module_.signature_of(func);
    if (args.size() != sig.params.size()) {
        throw HarnessError("function " + module_.display_name(func) + " expects " + std::to_string(sig.params.size()) +
                           " argument(s), got " + std::to_string(args.size()));
    }

    Impl impl{*this, {}, {}, {}, {}};
    impl.counters.calls.assign(module_.function_count(), 0);
    impl.stack.assign(args.begin(), args.end());

    RunResult result;
    try {
        impl.enter(func);
        impl.run_to_completion();
        result.outcome = impl.stack;
    } catch (const Trap& trap) {
        result.outcome = trap.reason;
    }
    result.counters = std::move(impl.counters);
    return result;
}

} // namespace protector
