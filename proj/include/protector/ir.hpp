#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace protector {

enum class ValueKind : std::uint8_t { i32 };

std::string_view to_string(ValueKind kind);

// Instruction categories used for overhead accounting. `other` is reserved and
// currently holds no mnemonic.
enum class Category : std::uint8_t { arithmetic, variable, memory, control, other };

inline constexpr std::size_t kCategoryCount = 5;

std::string_view to_string(Category category);

enum class Opcode : std::uint8_t {
    // arithmetic
    i32_const,
    i32_add,
    i32_sub,
    i32_mul,
    i32_and,
    i32_or,
    i32_xor,
    i32_shl,
    i32_shr_s,
    i32_shr_u,
    i32_eq,
    i32_ne,
    i32_lt_u,
    i32_gt_u,
    i32_eqz,
    // variable
    local_get,
    local_set,
    local_tee,
    global_get,
    global_set,
    // memory
    i32_load,
    i32_store,
    i32_load8_u,
    i32_store8,
    memory_size,
    // control
    block,
    loop,
    end,
    br,
    br_if,
    return_,
    unreachable,
    nop,
    drop,
    call,
    call_indirect,
};

inline constexpr std::size_t kOpcodeCount = static_cast<std::size_t>(Opcode::call_indirect) + 1;

/// What the instruction's `index` field refers to.
enum class ImmediateKind : std::uint8_t { none, i32_value, local, global, label, function, type, memarg, block };

struct OpcodeInfo {
    Opcode opcode;
    std::string_view mnemonic;
    Category category;
    ImmediateKind immediate;
    std::uint32_t natural_align; // bytes, memory ops only
};

const OpcodeInfo& info(Opcode op);
std::optional<Opcode> lookup_opcode(std::string_view mnemonic);

/// Throws Error for mnemonics outside the supported subset.
Category classify_instruction(std::string_view mnemonic);
inline Category classify(Opcode op) { return info(op).category; }

/// Transformation metadata carried on instructions. Never printed.
enum class InstrTag : std::uint8_t { none, canary_check };

struct MemArg {
    std::uint32_t offset = 0;
    std::uint32_t align = 0; // bytes; 0 means natural alignment

    friend bool operator==(const MemArg&, const MemArg&) = default;
};

struct Instruction {
    Opcode op = Opcode::nop;
    std::int32_t value = 0;   // i32.const
    std::uint32_t index = 0;  // local, global, label depth, function or type index
    MemArg mem{};
    std::optional<ValueKind> block_result;
    std::optional<std::string> label; // block/loop symbolic name, kept for printing
    InstrTag tag = InstrTag::none;

    [[nodiscard]] Category category() const { return classify(op); }

    // Structural equality ignores transformation tags.
    friend bool operator==(const Instruction& a, const Instruction& b) {
        return a.op == b.op && a.value == b.value && a.index == b.index && a.mem == b.mem &&
               a.block_result == b.block_result && a.label == b.label;
    }

    static Instruction simple(Opcode op) {
        Instruction instr;
        instr.op = op;
        return instr;
    }
    static Instruction with_index(Opcode op, std::uint32_t index) {
        Instruction instr = simple(op);
        instr.index = index;
        return instr;
    }
    static Instruction i32_const(std::int32_t v) {
        Instruction instr = simple(Opcode::i32_const);
        instr.value = v;
        return instr;
    }
    static Instruction i32_const_u(std::uint32_t v) { return i32_const(static_cast<std::int32_t>(v)); }
    static Instruction local_get(std::uint32_t i) { return with_index(Opcode::local_get, i); }
    static Instruction local_set(std::uint32_t i) { return with_index(Opcode::local_set, i); }
    static Instruction local_tee(std::uint32_t i) { return with_index(Opcode::local_tee, i); }
    static Instruction global_get(std::uint32_t i) { return with_index(Opcode::global_get, i); }
    static Instruction global_set(std::uint32_t i) { return with_index(Opcode::global_set, i); }
    static Instruction call(std::uint32_t f) { return with_index(Opcode::call, f); }
    static Instruction br(std::uint32_t depth) { return with_index(Opcode::br, depth); }
    static Instruction br_if(std::uint32_t depth) { return with_index(Opcode::br_if, depth); }
    static Instruction block(std::optional<ValueKind> result = std::nullopt) {
        Instruction instr = simple(Opcode::block);
        instr.block_result = result;
        return instr;
    }
    static Instruction loop(std::optional<ValueKind> result = std::nullopt) {
        Instruction instr = simple(Opcode::loop);
        instr.block_result = result;
        return instr;
    }
    static Instruction memory(Opcode op, std::uint32_t offset = 0) {
        Instruction instr = simple(op);
        instr.mem.offset = offset;
        return instr;
    }
};

struct FuncType {
    std::vector<ValueKind> params;
    std::optional<ValueKind> result;
    std::optional<std::string> name;

    // Signature identity; the symbolic name does not take part.
    [[nodiscard]] bool same_signature(const FuncType& other) const {
        return params == other.params && result == other.result;
    }
    friend bool operator==(const FuncType&, const FuncType&) = default;
};

enum class ExternalKind : std::uint8_t { function, table, memory, global };

std::string_view to_string(ExternalKind kind);

/// Only function imports are supported.
struct Import {
    std::string module;
    std::string field;
    std::uint32_t type_index = 0;
    std::optional<std::string> name;

    friend bool operator==(const Import&, const Import&) = default;
};

struct FunctionDef {
    std::uint32_t type_index = 0;
    std::vector<ValueKind> locals; // declared locals, excluding parameters
    std::vector<Instruction> body; // flat, without the implicit final `end`
    std::optional<std::string> name;
    std::map<std::uint32_t, std::string> local_names; // keyed by local index (params first)

    friend bool operator==(const FunctionDef&, const FunctionDef&) = default;
};

/// Constant initializer: `i32.const N` or `global.get G`.
struct ConstExpr {
    enum class Kind : std::uint8_t { i32_const, global_get };
    Kind kind = Kind::i32_const;
    std::int32_t value = 0; // constant, or the global index for global_get

    static ConstExpr constant(std::int32_t v) { return ConstExpr{Kind::i32_const, v}; }
    [[nodiscard]] bool is_constant() const { return kind == Kind::i32_const; }

    friend bool operator==(const ConstExpr&, const ConstExpr&) = default;
};

struct Global {
    ValueKind kind = ValueKind::i32;
    bool is_mutable = false;
    std::int32_t init = 0;
    std::optional<std::string> name;

    friend bool operator==(const Global&, const Global&) = default;
};

struct Limits {
    std::uint32_t min = 0;
    std::optional<std::uint32_t> max;

    friend bool operator==(const Limits&, const Limits&) = default;
};

struct Memory {
    Limits pages;
    std::optional<std::string> name;

    friend bool operator==(const Memory&, const Memory&) = default;
};

struct Table {
    Limits size;
    std::optional<std::string> name;

    friend bool operator==(const Table&, const Table&) = default;
};

struct DataSegment {
    ConstExpr offset;
    std::vector<std::uint8_t> bytes;

    friend bool operator==(const DataSegment&, const DataSegment&) = default;
};

struct ElemSegment {
    ConstExpr offset;
    std::vector<std::uint32_t> functions;

    friend bool operator==(const ElemSegment&, const ElemSegment&) = default;
};

struct Export {
    std::string name;
    ExternalKind kind = ExternalKind::function;
    std::uint32_t index = 0;

    friend bool operator==(const Export&, const Export&) = default;
};

/// A text-format module. Function indices cover imports first, then `functions`.
struct Module {
    std::vector<FuncType> types;
    std::vector<Import> imports;
    std::vector<FunctionDef> functions;
    std::vector<Global> globals;
    std::optional<Memory> memory;
    std::vector<DataSegment> data;
    std::optional<Table> table;
    std::vector<ElemSegment> elements;
    std::vector<Export> exports;
    std::optional<std::uint32_t> start;

    [[nodiscard]] std::size_t function_count() const { return imports.size() + functions.size(); }
    [[nodiscard]] bool is_import(std::uint32_t func) const { return func < imports.size(); }
    [[nodiscard]] std::uint32_t type_of(std::uint32_t func) const;
    [[nodiscard]] const FuncType& signature_of(std::uint32_t func) const;
    [[nodiscard]] std::optional<std::string> function_name(std::uint32_t func) const;
    /// `$name` when named, otherwise `#index`.
    [[nodiscard]] std::string display_name(std::uint32_t func) const;

    [[nodiscard]] std::optional<std::uint32_t> find_function(std::string_view name) const;
    [[nodiscard]] std::optional<std::uint32_t> find_global(std::string_view name) const;
    [[nodiscard]] const Export* find_export(std::string_view name, ExternalKind kind) const;

    friend bool operator==(const Module&, const Module&) = default;
};

/// Finds an existing type with this signature or appends a new one.
std::uint32_t intern_type(Module& module, const std::vector<ValueKind>& params, std::optional<ValueKind> result);

/// Appends a function import and shifts every reference to defined functions
/// (calls, element segments, exports, start). Returns the new import's function index.
std::uint32_t add_function_import(Module& module, Import import);

/// Appends a local of `kind` to `function` and returns its index.
std::uint32_t fresh_local(const Module& module, FunctionDef& function, ValueKind kind);

struct StackPointerRef {
    std::uint32_t global_index = 0;
    std::optional<std::string> name;

    friend bool operator==(const StackPointerRef&, const StackPointerRef&) = default;
};

inline constexpr std::string_view kStackPointerName = "$__stack_pointer";

/// Resolves the unmanaged stack pointer: the override if given, else the mutable
/// i32 global `$__stack_pointer`, else the only mutable i32 global.
StackPointerRef find_stack_pointer(const Module& module, std::optional<std::string_view> override_name = std::nullopt);

/// Per-category instruction counts.
struct CategoryCounts {
    std::array<std::uint64_t, kCategoryCount> values{};

    std::uint64_t& operator[](Category c) { return values[static_cast<std::size_t>(c)]; }
    std::uint64_t operator[](Category c) const { return values[static_cast<std::size_t>(c)]; }
    [[nodiscard]] std::uint64_t total() const;
    void add(const Instruction& instr) { ++(*this)[instr.category()]; }

    CategoryCounts& operator+=(const CategoryCounts& other);
    friend bool operator==(const CategoryCounts&, const CategoryCounts&) = default;
};

CategoryCounts count_categories(const std::vector<Instruction>& body);

/// For each block/loop position in `body`, the position of its matching `end`.
/// Throws Error when the body is unbalanced.
std::vector<std::size_t> match_ends(const std::vector<Instruction>& body);

} // namespace protector
