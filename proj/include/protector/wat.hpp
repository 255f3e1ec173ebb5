#pragma once

#include "protector/error.hpp"
#include "protector/ir.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace protector::wat {

enum class TokenKind : std::uint8_t { lparen, rparen, keyword, id, integer, floating, string };

std::string_view to_string(TokenKind kind);

struct Token {
    TokenKind kind = TokenKind::keyword;
    std::string text;                // lexeme exactly as written
    std::vector<std::uint8_t> bytes; // decoded contents, strings only
    SourceSpan span;

    [[nodiscard]] std::size_t length() const { return text.size(); }
};

/// Splits WAT source into tokens, dropping whitespace, `;;` line comments and
/// nested `(; ;)` block comments.
std::vector<Token> tokenize(std::string_view text);

/// Parses a flat-form module. Symbolic references are resolved to indices;
/// names are retained on the IR for printing.
Module parse_module(std::string_view text);

/// Prints flat-form text that parses back to an equal module.
std::string print_module(const Module& module);

/// Prints one instruction without indentation, resolving names where the module has them.
std::string print_instruction(const Module& module, const Instruction& instr);

} // namespace protector::wat
