#include "protector/wat.hpp"

#include <charconv>
#include <limits>
#include <map>
#include <set>

namespace protector::wat {

namespace {

struct Node {
    bool is_list = false;
    Token atom;
    SourceSpan span;
    std::vector<Node> items;

    [[nodiscard]] bool is(TokenKind kind) const { return !is_list && atom.kind == kind; }
    [[nodiscard]] bool is_keyword(std::string_view word) const { return is(TokenKind::keyword) && atom.text == word; }
    /// Keyword at the head of a list, or empty.
    [[nodiscard]] std::string_view head() const {
        if (!is_list || items.empty() || !items.front().is(TokenKind::keyword)) return {};
        return items.front().atom.text;
    }
};

[[noreturn]] void fail(const std::string& message, SourceSpan span) { throw ParseError(message, span); }

class TreeBuilder {
  public:
    explicit TreeBuilder(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    Node build_single() {
        if (tokens_.empty()) fail("empty input: expected '(module'", {});
        Node root = next();
        if (pos_ < tokens_.size()) fail("unexpected content after module", tokens_[pos_].span);
        return root;
    }

  private:
    Node next() {
        Token& tok = tokens_[pos_++];
        if (tok.kind == TokenKind::rparen) fail("unexpected ')'", tok.span);
        if (tok.kind != TokenKind::lparen) return Node{false, std::move(tok), tok.span, {}};
        Node list{true, {}, tok.span, {}};
        for (;;) {
            if (pos_ >= tokens_.size()) fail("unclosed '('", list.span);
            if (tokens_[pos_].kind == TokenKind::rparen) {
                ++pos_;
                return list;
            }
            list.items.push_back(next());
        }
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

std::optional<std::uint64_t> parse_magnitude(std::string_view digits) {
    int base = 10;
    if (digits.starts_with("0x") || digits.starts_with("0X")) {
        base = 16;
        digits.remove_prefix(2);
    }
    std::string clean;
    for (char c : digits) {
        if (c != '_') clean.push_back(c);
    }
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(clean.data(), clean.data() + clean.size(), value, base);
    if (ec != std::errc{} || ptr != clean.data() + clean.size()) return std::nullopt;
    return value;
}

std::int32_t parse_i32(const Node& node) {
    if (!node.is(TokenKind::integer)) fail("expected integer literal, found '" + node.atom.text + "'", node.span);
    std::string_view text = node.atom.text;
    bool negative = false;
    if (text.front() == '+' || text.front() == '-') {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    const auto magnitude = parse_magnitude(text);
    if (!magnitude) fail("integer literal out of range: " + node.atom.text, node.span);
    if (negative) {
        if (*magnitude > 0x80000000ULL) fail("i32 literal out of range: " + node.atom.text, node.span);
        return static_cast<std::int32_t>(static_cast<std::uint32_t>(0U - static_cast<std::uint32_t>(*magnitude)));
    }
    if (*magnitude > 0xFFFFFFFFULL) fail("i32 literal out of range: " + node.atom.text, node.span);
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(*magnitude));
}

std::uint32_t parse_u32(const Node& node) {
    if (!node.is(TokenKind::integer) || node.atom.text.front() == '-' || node.atom.text.front() == '+') {
        fail("expected unsigned integer, found '" + node.atom.text + "'", node.span);
    }
    const auto magnitude = parse_magnitude(node.atom.text);
    if (!magnitude || *magnitude > std::numeric_limits<std::uint32_t>::max()) {
        fail("integer out of range: " + node.atom.text, node.span);
    }
    return static_cast<std::uint32_t>(*magnitude);
}

std::optional<std::uint32_t> parse_u32_suffix(const Node& node, std::string_view prefix) {
    if (!node.is(TokenKind::keyword) || !node.atom.text.starts_with(prefix)) return std::nullopt;
    const auto digits = std::string_view(node.atom.text).substr(prefix.size());
    const auto magnitude = parse_magnitude(digits);
    if (!magnitude || *magnitude > std::numeric_limits<std::uint32_t>::max()) {
        fail("invalid value in '" + node.atom.text + "'", node.span);
    }
    return static_cast<std::uint32_t>(*magnitude);
}

ValueKind parse_value_kind(const Node& node) {
    if (node.is_keyword("i32")) return ValueKind::i32;
    if (node.is_keyword("i64") || node.is_keyword("f32") || node.is_keyword("f64")) {
        fail("unsupported value type '" + node.atom.text + "' (only i32 is supported)", node.span);
    }
    fail("expected value type, found '" + (node.is_list ? std::string("(") : node.atom.text) + "'", node.span);
}

std::string parse_name_string(const Node& node) {
    if (!node.is(TokenKind::string)) fail("expected string literal", node.span);
    return {node.atom.bytes.begin(), node.atom.bytes.end()};
}

bool is_mnemonic_like(std::string_view head) {
    static const std::set<std::string_view> structured{"if", "then", "else", "select", "br_table", "memory.grow"};
    return lookup_opcode(head).has_value() || structured.contains(head) || head.find('.') != std::string_view::npos;
}

/// Names bound in one index space.
class NameSpace {
  public:
    explicit NameSpace(std::string_view what) : what_(what) {}

    void bind(const Node& id, std::uint32_t index) {
        if (!names_.emplace(id.atom.text, index).second) fail("duplicate " + what_ + " name " + id.atom.text, id.span);
    }

    std::uint32_t resolve(const Node& ref, std::size_t limit) const {
        if (ref.is(TokenKind::id)) {
            const auto it = names_.find(ref.atom.text);
            if (it == names_.end()) fail("unresolved " + what_ + " " + ref.atom.text, ref.span);
            return it->second;
        }
        const auto index = parse_u32(ref);
        if (index >= limit) fail(what_ + " index " + ref.atom.text + " out of range", ref.span);
        return index;
    }

  private:
    std::string what_;
    std::map<std::string, std::uint32_t, std::less<>> names_;
};

class ModuleBuilder {
  public:
    Module build(const Node& root) {
        if (!root.is_list || root.head() != "module") fail("expected '(module'", root.span);
        std::size_t first = 1;
        if (root.items.size() > 1 && root.items[1].is(TokenKind::id)) first = 2;
        std::vector<const Node*> fields;
        for (std::size_t i = first; i < root.items.size(); ++i) {
            const Node& field = root.items[i];
            if (!field.is_list || field.head().empty()) fail("expected module field", field.span);
            fields.push_back(&field);
        }

        for (const Node* f : fields) {
            if (f->head() == "type") declare_type(*f);
        }
        for (const Node* f : fields) {
            const auto head = f->head();
            if (head == "import") declare_import(*f);
            else if (head == "func") declare_function(*f);
            else if (head == "global") declare_global(*f);
            else if (head == "memory") declare_memory(*f);
            else if (head == "table") declare_table(*f);
            else if (head != "type" && head != "export" && head != "elem" && head != "data" && head != "start") {
                fail("unsupported module field '" + std::string(head) + "'", f->span);
            }
        }
        flush_inline_exports();
        for (const Node* f : fields) {
            const auto head = f->head();
            if (head == "export") parse_export(*f);
            else if (head == "elem") parse_elem(*f);
            else if (head == "data") parse_data(*f);
            else if (head == "start") parse_start(*f);
        }
        for (const auto& pending : pending_bodies_) parse_body(pending);
        return std::move(module_);
    }

  private:
    struct PendingBody {
        const Node* field;
        std::size_t first_instr;
        std::uint32_t defined_index;
        std::map<std::string, std::uint32_t, std::less<>> local_names;
    };

    struct Signature {
        std::vector<ValueKind> params;
        std::vector<std::optional<std::string>> param_names;
        std::optional<ValueKind> result;
        std::optional<std::uint32_t> explicit_type;
        SourceSpan span;
    };

    // Consumes (type X) (param ...)* (result ...)* starting at items[i]; returns the next index.
    std::size_t parse_signature(const Node& list, std::size_t i, Signature& sig, bool allow_param_names) {
        sig.span = list.span;
        if (i < list.items.size() && list.items[i].head() == "type") {
            const Node& t = list.items[i];
            if (t.items.size() != 2) fail("expected (type <index>)", t.span);
            sig.explicit_type = types_.resolve(t.items[1], module_.types.size());
            ++i;
        }
        while (i < list.items.size() && list.items[i].head() == "param") {
            const Node& p = list.items[i];
            if (p.items.size() >= 2 && p.items[1].is(TokenKind::id)) {
                if (!allow_param_names) fail("parameter names are not allowed here", p.items[1].span);
                if (p.items.size() != 3) fail("named param takes exactly one type", p.span);
                sig.params.push_back(parse_value_kind(p.items[2]));
                sig.param_names.emplace_back(p.items[1].atom.text);
            } else {
                for (std::size_t k = 1; k < p.items.size(); ++k) {
                    sig.params.push_back(parse_value_kind(p.items[k]));
                    sig.param_names.emplace_back();
                }
            }
            ++i;
        }
        while (i < list.items.size() && list.items[i].head() == "result") {
            const Node& r = list.items[i];
            for (std::size_t k = 1; k < r.items.size(); ++k) {
                if (sig.result) fail("at most one result value is supported", r.items[k].span);
                sig.result = parse_value_kind(r.items[k]);
            }
            ++i;
        }
        return i;
    }

    std::uint32_t resolve_signature(const Signature& sig) {
        if (sig.explicit_type) {
            const FuncType& t = module_.types[*sig.explicit_type];
            const bool inline_given = !sig.params.empty() || sig.result;
            if (inline_given && !(t.params == sig.params && t.result == sig.result)) {
                fail("inline signature does not match referenced type", sig.span);
            }
            return *sig.explicit_type;
        }
        return intern_type(module_, sig.params, sig.result);
    }

    void declare_type(const Node& f) {
        std::size_t i = 1;
        std::optional<std::string> name;
        if (i < f.items.size() && f.items[i].is(TokenKind::id)) {
            types_.bind(f.items[i], static_cast<std::uint32_t>(module_.types.size()));
            name = f.items[i].atom.text;
            ++i;
        }
        if (i + 1 != f.items.size() || f.items[i].head() != "func") fail("expected (type (func ...))", f.span);
        const Node& fn = f.items[i];
        Signature sig;
        if (parse_signature(fn, 1, sig, false) != fn.items.size()) fail("unexpected item in function type", fn.span);
        if (sig.explicit_type) fail("type reference inside type definition", fn.span);
        module_.types.push_back({sig.params, sig.result, name});
    }

    void declare_import(const Node& f) {
        if (!module_.functions.empty()) fail("imports must precede function definitions", f.span);
        if (f.items.size() != 4) fail("expected (import \"module\" \"field\" (func ...))", f.span);
        Import import;
        import.module = parse_name_string(f.items[1]);
        import.field = parse_name_string(f.items[2]);
        const Node& desc = f.items[3];
        if (desc.head() != "func") fail("only function imports are supported", desc.span);
        std::size_t i = 1;
        const auto index = static_cast<std::uint32_t>(module_.imports.size());
        if (i < desc.items.size() && desc.items[i].is(TokenKind::id)) {
            funcs_.bind(desc.items[i], index);
            import.name = desc.items[i].atom.text;
            ++i;
        }
        Signature sig;
        if (parse_signature(desc, i, sig, false) != desc.items.size()) fail("unexpected item in import", desc.span);
        import.type_index = resolve_signature(sig);
        module_.imports.push_back(std::move(import));
    }

    void declare_function(const Node& f) {
        FunctionDef fn;
        std::size_t i = 1;
        const auto defined = static_cast<std::uint32_t>(module_.functions.size());
        const auto func_index = static_cast<std::uint32_t>(module_.imports.size()) + defined;
        if (i < f.items.size() && f.items[i].is(TokenKind::id)) {
            funcs_.bind(f.items[i], func_index);
            fn.name = f.items[i].atom.text;
            ++i;
        }
        while (i < f.items.size() && f.items[i].head() == "export") {
            pending_inline_exports_.push_back({f.items[i], ExternalKind::function, func_index});
            ++i;
        }
        if (i < f.items.size() && f.items[i].head() == "import") fail("inline function imports are not supported", f.items[i].span);

        Signature sig;
        i = parse_signature(f, i, sig, true);
        fn.type_index = resolve_signature(sig);

        PendingBody pending{&f, 0, defined, {}};
        const auto& params = module_.types[fn.type_index].params;
        std::uint32_t local_index = 0;
        for (std::size_t p = 0; p < sig.param_names.size(); ++p, ++local_index) {
            if (sig.param_names[p]) {
                bind_local(pending, fn, *sig.param_names[p], local_index, f.span);
            }
        }
        local_index = static_cast<std::uint32_t>(params.size());
        while (i < f.items.size() && f.items[i].head() == "local") {
            const Node& l = f.items[i];
            if (l.items.size() >= 2 && l.items[1].is(TokenKind::id)) {
                if (l.items.size() != 3) fail("named local takes exactly one type", l.span);
                fn.locals.push_back(parse_value_kind(l.items[2]));
                bind_local(pending, fn, l.items[1].atom.text, local_index++, l.items[1].span);
            } else {
                for (std::size_t k = 1; k < l.items.size(); ++k, ++local_index) {
                    fn.locals.push_back(parse_value_kind(l.items[k]));
                }
            }
            ++i;
        }
        pending.first_instr = i;
        pending_bodies_.push_back(std::move(pending));
        module_.functions.push_back(std::move(fn));
    }

    static void bind_local(PendingBody& pending, FunctionDef& fn, const std::string& name, std::uint32_t index,
                           SourceSpan span) {
        if (!pending.local_names.emplace(name, index).second) fail("duplicate local name " + name, span);
        fn.local_names[index] = name;
    }

    void declare_global(const Node& f) {
        Global g;
        std::size_t i = 1;
        const auto index = static_cast<std::uint32_t>(module_.globals.size());
        if (i < f.items.size() && f.items[i].is(TokenKind::id)) {
            globals_.bind(f.items[i], index);
            g.name = f.items[i].atom.text;
            ++i;
        }
        while (i < f.items.size() && f.items[i].head() == "export") {
            pending_inline_exports_.push_back({f.items[i], ExternalKind::global, index});
            ++i;
        }
        if (i >= f.items.size()) fail("global needs a type", f.span);
        if (f.items[i].head() == "mut") {
            if (f.items[i].items.size() != 2) fail("expected (mut <type>)", f.items[i].span);
            g.is_mutable = true;
            g.kind = parse_value_kind(f.items[i].items[1]);
        } else {
            g.kind = parse_value_kind(f.items[i]);
        }
        ++i;
        if (i + 1 != f.items.size()) fail("global needs exactly one (i32.const N) initializer", f.span);
        const Node& init = f.items[i];
        if (init.head() != "i32.const" || init.items.size() != 2) {
            fail("global initializer must be (i32.const N)", init.span);
        }
        g.init = parse_i32(init.items[1]);
        module_.globals.push_back(std::move(g));
    }

    Limits parse_limits(const Node& f, std::size_t i, std::size_t end) {
        Limits limits;
        if (i >= end) fail("expected limits", f.span);
        limits.min = parse_u32(f.items[i++]);
        if (i < end) limits.max = parse_u32(f.items[i++]);
        if (i != end) fail("unexpected item after limits", f.items[i].span);
        if (limits.max && *limits.max < limits.min) fail("maximum below minimum", f.span);
        return limits;
    }

    void declare_memory(const Node& f) {
        if (module_.memory) fail("at most one memory is supported", f.span);
        Memory mem;
        std::size_t i = 1;
        if (i < f.items.size() && f.items[i].is(TokenKind::id)) {
            memories_.bind(f.items[i], 0);
            mem.name = f.items[i].atom.text;
            ++i;
        }
        while (i < f.items.size() && f.items[i].head() == "export") {
            pending_inline_exports_.push_back({f.items[i], ExternalKind::memory, 0});
            ++i;
        }
        mem.pages = parse_limits(f, i, f.items.size());
        module_.memory = std::move(mem);
    }

    void declare_table(const Node& f) {
        if (module_.table) fail("at most one table is supported", f.span);
        Table table;
        std::size_t i = 1;
        if (i < f.items.size() && f.items[i].is(TokenKind::id)) {
            tables_.bind(f.items[i], 0);
            table.name = f.items[i].atom.text;
            ++i;
        }
        while (i < f.items.size() && f.items[i].head() == "export") {
            pending_inline_exports_.push_back({f.items[i], ExternalKind::table, 0});
            ++i;
        }
        std::size_t end = f.items.size();
        if (end == 0 || !(f.items[end - 1].is_keyword("funcref") || f.items[end - 1].is_keyword("anyfunc"))) {
            fail("expected funcref table", f.span);
        }
        table.size = parse_limits(f, i, end - 1);
        module_.table = std::move(table);
    }

    ConstExpr parse_offset(const Node& node) {
        const Node* expr = &node;
        if (node.head() == "offset") {
            if (node.items.size() != 2) fail("expected (offset <expr>)", node.span);
            expr = &node.items[1];
        }
        if (expr->head() == "i32.const" && expr->items.size() == 2) return ConstExpr::constant(parse_i32(expr->items[1]));
        if (expr->head() == "global.get" && expr->items.size() == 2) {
            const auto g = globals_.resolve(expr->items[1], module_.globals.size());
            return ConstExpr{ConstExpr::Kind::global_get, static_cast<std::int32_t>(g)};
        }
        fail("segment offset must be (i32.const N) or (global.get G)", expr->span);
    }

    void add_export(const Node& name_node, ExternalKind kind, std::uint32_t index) {
        std::string name = parse_name_string(name_node);
        if (!export_names_.insert(name).second) fail("duplicate export \"" + name + "\"", name_node.span);
        module_.exports.push_back({std::move(name), kind, index});
    }

    void parse_export(const Node& f) {
        if (f.items.size() != 3 || !f.items[2].is_list || f.items[2].items.size() != 2) {
            fail("expected (export \"name\" (<kind> <index>))", f.span);
        }
        const Node& desc = f.items[2];
        const auto kind = desc.head();
        const Node& ref = desc.items[1];
        if (kind == "func") add_export(f.items[1], ExternalKind::function, funcs_.resolve(ref, module_.function_count()));
        else if (kind == "global") add_export(f.items[1], ExternalKind::global, globals_.resolve(ref, module_.globals.size()));
        else if (kind == "memory") add_export(f.items[1], ExternalKind::memory, memories_.resolve(ref, module_.memory ? 1 : 0));
        else if (kind == "table") add_export(f.items[1], ExternalKind::table, tables_.resolve(ref, module_.table ? 1 : 0));
        else fail("unknown export kind '" + std::string(kind) + "'", desc.span);
    }

    void flush_inline_exports() {
        for (const auto& e : pending_inline_exports_) {
            if (e.node.items.size() != 2) fail("expected (export \"name\")", e.node.span);
            add_export(e.node.items[1], e.kind, e.index);
        }
        pending_inline_exports_.clear();
    }

    void parse_elem(const Node& f) {
        std::size_t i = 1;
        if (i < f.items.size() && f.items[i].is(TokenKind::id)) ++i;
        if (i < f.items.size() && f.items[i].head() == "table") ++i;
        if (i >= f.items.size()) fail("element segment needs an offset", f.span);
        ElemSegment seg;
        seg.offset = parse_offset(f.items[i++]);
        if (i < f.items.size() && f.items[i].is_keyword("func")) ++i;
        for (; i < f.items.size(); ++i) {
            seg.functions.push_back(funcs_.resolve(f.items[i], module_.function_count()));
        }
        module_.elements.push_back(std::move(seg));
    }

    void parse_data(const Node& f) {
        std::size_t i = 1;
        if (i < f.items.size() && f.items[i].is(TokenKind::id)) ++i;
        if (i < f.items.size() && f.items[i].head() == "memory") ++i;
        if (i >= f.items.size()) fail("data segment needs an offset", f.span);
        DataSegment seg;
        seg.offset = parse_offset(f.items[i++]);
        for (; i < f.items.size(); ++i) {
            if (!f.items[i].is(TokenKind::string)) fail("expected string in data segment", f.items[i].span);
            const auto& bytes = f.items[i].atom.bytes;
            seg.bytes.insert(seg.bytes.end(), bytes.begin(), bytes.end());
        }
        module_.data.push_back(std::move(seg));
    }

    void parse_start(const Node& f) {
        if (f.items.size() != 2) fail("expected (start <func>)", f.span);
        if (module_.start) fail("duplicate start function", f.span);
        module_.start = funcs_.resolve(f.items[1], module_.function_count());
    }

    void parse_body(const PendingBody& pending) {
        const Node& f = *pending.field;
        FunctionDef& fn = module_.functions[pending.defined_index];
        const auto local_count = module_.types[fn.type_index].params.size() + fn.locals.size();
        std::vector<std::optional<std::string>> labels;

        auto expect_atom = [&](std::size_t& i, const Node& instr_node) -> const Node& {
            if (i + 1 >= f.items.size() || f.items[i + 1].is_list) {
                fail("missing immediate for '" + instr_node.atom.text + "'", instr_node.span);
            }
            return f.items[++i];
        };

        for (std::size_t i = pending.first_instr; i < f.items.size(); ++i) {
            const Node& node = f.items[i];
            if (node.is_list) {
                const auto head = node.head();
                if (!head.empty() && is_mnemonic_like(head)) {
                    fail("folded expression syntax is not supported; use flat instruction form", node.span);
                }
                fail("unexpected list in function body", node.span);
            }
            if (!node.is(TokenKind::keyword)) fail("expected instruction, found '" + node.atom.text + "'", node.span);
            const auto op = lookup_opcode(node.atom.text);
            if (!op) fail("unknown instruction '" + node.atom.text + "'", node.span);

            Instruction instr = Instruction::simple(*op);
            switch (info(*op).immediate) {
            case ImmediateKind::none:
                break;
            case ImmediateKind::i32_value:
                instr.value = parse_i32(expect_atom(i, node));
                break;
            case ImmediateKind::local: {
                const Node& ref = expect_atom(i, node);
                if (ref.is(TokenKind::id)) {
                    const auto it = pending.local_names.find(ref.atom.text);
                    if (it == pending.local_names.end()) fail("unresolved local " + ref.atom.text, ref.span);
                    instr.index = it->second;
                } else {
                    instr.index = parse_u32(ref);
                    if (instr.index >= local_count) fail("local index " + ref.atom.text + " out of range", ref.span);
                }
                break;
            }
            case ImmediateKind::global:
                instr.index = globals_.resolve(expect_atom(i, node), module_.globals.size());
                break;
            case ImmediateKind::function:
                instr.index = funcs_.resolve(expect_atom(i, node), module_.function_count());
                break;
            case ImmediateKind::label: {
                const Node& ref = expect_atom(i, node);
                if (ref.is(TokenKind::id)) {
                    bool found = false;
                    for (std::size_t d = 0; d < labels.size(); ++d) {
                        if (labels[labels.size() - 1 - d] == ref.atom.text) {
                            instr.index = static_cast<std::uint32_t>(d);
                            found = true;
                            break;
                        }
                    }
                    if (!found) fail("unresolved label " + ref.atom.text, ref.span);
                } else {
                    instr.index = parse_u32(ref);
                    if (instr.index > labels.size()) fail("label depth " + ref.atom.text + " out of range", ref.span);
                }
                break;
            }
            case ImmediateKind::memarg:
                while (i + 1 < f.items.size() && !f.items[i + 1].is_list) {
                    if (auto off = parse_u32_suffix(f.items[i + 1], "offset=")) {
                        instr.mem.offset = *off;
                    } else if (auto align = parse_u32_suffix(f.items[i + 1], "align=")) {
                        if (*align == 0 || (*align & (*align - 1)) != 0) fail("alignment must be a power of two", f.items[i + 1].span);
                        instr.mem.align = *align == info(*op).natural_align ? 0 : *align;
                    } else {
                        break;
                    }
                    ++i;
                }
                break;
            case ImmediateKind::type: {
                if (i + 1 < f.items.size() && !f.items[i + 1].is_list &&
                    (f.items[i + 1].is(TokenKind::id) || f.items[i + 1].is(TokenKind::integer))) {
                    tables_.resolve(f.items[++i], module_.table ? 1 : 0);
                }
                if (!module_.table) fail("call_indirect requires a table", node.span);
                // Reuse the signature parser over the items that follow.
                Signature sig;
                Node window{true, {}, node.span, {}};
                std::size_t j = i + 1;
                while (j < f.items.size() &&
                       (f.items[j].head() == "type" || f.items[j].head() == "param" || f.items[j].head() == "result")) {
                    window.items.push_back(f.items[j]);
                    ++j;
                }
                if (parse_signature(window, 0, sig, false) != window.items.size()) {
                    fail("malformed call_indirect type use", node.span);
                }
                instr.index = resolve_signature(sig);
                i = j - 1;
                break;
            }
            case ImmediateKind::block: {
                if (i + 1 < f.items.size() && f.items[i + 1].is(TokenKind::id)) instr.label = f.items[++i].atom.text;
                if (i + 1 < f.items.size() && f.items[i + 1].head() == "param") {
                    fail("block parameters are not supported", f.items[i + 1].span);
                }
                if (i + 1 < f.items.size() && f.items[i + 1].head() == "type") {
                    const Node& t = f.items[++i];
                    if (t.items.size() != 2) fail("expected (type <index>)", t.span);
                    const FuncType& bt = module_.types[types_.resolve(t.items[1], module_.types.size())];
                    if (!bt.params.empty()) fail("block parameters are not supported", t.span);
                    instr.block_result = bt.result;
                }
                while (i + 1 < f.items.size() && f.items[i + 1].head() == "result") {
                    const Node& r = f.items[++i];
                    for (std::size_t k = 1; k < r.items.size(); ++k) {
                        if (instr.block_result) fail("at most one result value is supported", r.items[k].span);
                        instr.block_result = parse_value_kind(r.items[k]);
                    }
                }
                labels.push_back(instr.label);
                break;
            }
            }

            if (*op == Opcode::end) {
                if (labels.empty()) fail("'end' without matching block or loop", node.span);
                if (i + 1 < f.items.size() && f.items[i + 1].is(TokenKind::id) && labels.back() == f.items[i + 1].atom.text) {
                    ++i;
                }
                labels.pop_back();
            }
            fn.body.push_back(std::move(instr));
        }
        if (!labels.empty()) fail("function body has an unclosed block or loop", f.span);
    }

    struct InlineExport {
        const Node& node;
        ExternalKind kind;
        std::uint32_t index;
    };

    Module module_;
    NameSpace types_{"type"};
    NameSpace funcs_{"function"};
    NameSpace globals_{"global"};
    NameSpace memories_{"memory"};
    NameSpace tables_{"table"};
    std::set<std::string> export_names_;
    std::vector<InlineExport> pending_inline_exports_;
    std::vector<PendingBody> pending_bodies_;
};

} // namespace

Module parse_module(std::string_view text) {
    const Node root = TreeBuilder(tokenize(text)).build_single();
    ModuleBuilder builder;
    return builder.build(root);
}

} // namespace protector::wat
