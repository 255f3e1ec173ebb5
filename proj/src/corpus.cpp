#include "protector/corpus.hpp"

#include "protector/error.hpp"
#include "protector/wat.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

#ifndef PROTECTOR_CORPUS_DIR
#define PROTECTOR_CORPUS_DIR "corpus"
#endif

namespace protector {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExpectedOutcome outcome_from_json(const json& j) {
    ExpectedOutcome out;
    if (j.contains("trap")) {
        const auto text = j.at("trap").get<std::string>();
        out.trap = parse_trap_reason(text);
        if (!out.trap) throw Error("unknown trap reason \"" + text + "\"");
    } else {
        out.values = j.at("values").get<std::vector<std::uint32_t>>();
    }
    if (j.contains("flag")) out.flag = j.at("flag").get<std::uint32_t>();
    return out;
}

} // namespace

bool ExpectedOutcome::matches(const RunResult& result, std::optional<std::uint32_t> flag_value) const {
    if (trap) {
        if (!result.trapped() || result.trap() != *trap) return false;
    } else if (result.trapped() || result.values() != *values) {
        return false;
    }
    return !flag || flag_value == flag;
}

std::string ExpectedOutcome::describe() const {
    std::string s;
    if (trap) {
        s = "trap " + std::string(to_string(*trap));
    } else {
        s = "values [";
        for (std::size_t i = 0; i < values->size(); ++i) s += (i ? ", " : "") + std::to_string((*values)[i]);
        s += "]";
    }
    if (flag) s += ", flag " + std::to_string(*flag);
    return s;
}

Module CorpusCase::parse() const { return wat::parse_module(module_text); }

std::vector<std::string> corpus_case_names() { return {"hijack_indirect", "linear_overwrite", "benign_copy"}; }

std::filesystem::path default_corpus_dir() { return PROTECTOR_CORPUS_DIR; }

CorpusCase load_corpus_case(std::string_view name, const std::filesystem::path& dir) {
    const auto names = corpus_case_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::string list;
        for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
        throw Error("unknown corpus case \"" + std::string(name) + "\"; available: " + list);
    }
    const auto case_path = dir / (std::string(name) + ".case.json");
    CorpusCase c;
    try {
        const auto j = json::parse(read_file(case_path));
        c.name = j.at("name").get<std::string>();
        c.description = j.value("description", "");
        c.module_path = dir / j.at("module").get<std::string>();
        c.entry = j.at("entry").get<std::string>();
        c.input_addr = j.at("input_addr").get<std::uint32_t>();
        c.buffer_size = j.at("buffer_size").get<std::uint32_t>();
        c.benign_input = parse_hex(j.at("benign_input").get<std::string>());
        if (!j.at("attack_input").is_null()) c.attack_input = parse_hex(j.at("attack_input").get<std::string>());
        c.overrun_bytes = j.at("overrun_bytes").get<std::uint32_t>();
        if (!j.at("flag_global").is_null()) c.flag_global = j.at("flag_global").get<std::string>();
        const auto region = j.at("stack_region").get<std::vector<std::uint32_t>>();
        if (region.size() != 2 || region[0] > region[1]) throw Error("stack_region must be [begin, end]");
        c.stack_region = {region[0], region[1]};
        c.time = j.at("time").get<std::uint32_t>();
        for (const auto& [mode, e] : j.at("expected").items()) {
            CaseExpectation exp;
            exp.benign = outcome_from_json(e.at("benign"));
            if (e.contains("attack")) exp.attack = outcome_from_json(e.at("attack"));
            c.expected.emplace(mode, std::move(exp));
        }
    } catch (const json::exception& e) {
        throw Error(case_path.string() + ": " + e.what());
    }
    if (c.name != name) throw Error(case_path.string() + ": name field is \"" + c.name + "\"");
    c.module_text = read_file(c.module_path);
    return c;
}

std::vector<std::uint8_t> shrink_framed_input(std::span<const std::uint8_t> framed, std::uint32_t drop) {
    if (framed.size() < 4) throw Error("framed input shorter than its length prefix");
    const std::uint32_t len = framed[0] | framed[1] << 8 | framed[2] << 16 | static_cast<std::uint32_t>(framed[3]) << 24;
    if (len + 4ULL != framed.size() || drop > len) throw Error("cannot shrink framed input");
    const std::uint32_t kept = len - drop;
    std::vector<std::uint8_t> out(framed.begin(), framed.begin() + 4 + kept);
    for (int i = 0; i < 4; ++i) out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(kept >> (8 * i));
    return out;
}

std::vector<std::uint8_t> parse_hex(std::string_view text) {
    auto nibble = [&](char ch) -> std::uint8_t {
        if (ch >= '0' && ch <= '9') return static_cast<std::uint8_t>(ch - '0');
        if (ch >= 'a' && ch <= 'f') return static_cast<std::uint8_t>(ch - 'a' + 10);
        if (ch >= 'A' && ch <= 'F') return static_cast<std::uint8_t>(ch - 'A' + 10);
        throw Error("invalid hex digit '" + std::string(1, ch) + "'");
    };
    if (text.size() % 2 != 0) throw Error("hex string has odd length");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 2);
    for (std::size_t i = 0; i < text.size(); i += 2) {
        out.push_back(static_cast<std::uint8_t>(nibble(text[i]) << 4 | nibble(text[i + 1])));
    }
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        s += digits[b >> 4];
        s += digits[b & 0xF];
    }
    return s;
}

} // namespace protector
