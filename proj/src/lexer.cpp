#include "protector/wat.hpp"

#include <cctype>

namespace protector::wat {

std::string_view to_string(TokenKind kind) {
    switch (kind) {
    case TokenKind::lparen: return "'('";
    case TokenKind::rparen: return "')'";
    case TokenKind::keyword: return "keyword";
    case TokenKind::id: return "identifier";
    case TokenKind::integer: return "integer";
    case TokenKind::floating: return "float";
    case TokenKind::string: return "string";
    }
    return "token";
}

namespace {

bool is_idchar(char c) {
    if (std::isalnum(static_cast<unsigned char>(c))) return true;
    switch (c) {
    case '!': case '#': case '$': case '%': case '&': case '\'': case '*': case '+': case '-': case '.':
    case '/': case ':': case '<': case '=': case '>': case '?': case '@': case '\\': case '^': case '_':
    case '`': case '|': case '~':
        return true;
    default:
        return false;
    }
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

bool is_digits(std::string_view s, bool hex) {
    if (s.empty() || s.front() == '_' || s.back() == '_') return false;
    bool prev_underscore = false;
    for (char c : s) {
        if (c == '_') {
            if (prev_underscore) return false;
            prev_underscore = true;
            continue;
        }
        prev_underscore = false;
        if (hex ? hex_value(c) < 0 : !std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

TokenKind classify_atom(std::string_view s) {
    if (s.front() == '$') return TokenKind::id;
    std::string_view body = s;
    if (body.front() == '+' || body.front() == '-') body.remove_prefix(1);
    if (body.empty()) return TokenKind::keyword;
    if (body.starts_with("0x") || body.starts_with("0X")) {
        body.remove_prefix(2);
        if (is_digits(body, true)) return TokenKind::integer;
        return body.find_first_of(".pP") != std::string_view::npos ? TokenKind::floating : TokenKind::keyword;
    }
    if (is_digits(body, false)) return TokenKind::integer;
    if (body == "inf" || body == "nan" || body.starts_with("nan:")) return TokenKind::floating;
    if (std::isdigit(static_cast<unsigned char>(body.front())) &&
        body.find_first_of(".eE") != std::string_view::npos) {
        return TokenKind::floating;
    }
    return TokenKind::keyword;
}

class Lexer {
  public:
    explicit Lexer(std::string_view text) : text_(text) {}

    std::vector<Token> run() {
        std::vector<Token> tokens;
        while (skip_trivia(), pos_ < text_.size()) {
            const SourceSpan start = span();
            const char c = text_[pos_];
            if (c == '(') {
                advance(1);
                tokens.push_back({TokenKind::lparen, "(", {}, start});
            } else if (c == ')') {
                advance(1);
                tokens.push_back({TokenKind::rparen, ")", {}, start});
            } else if (c == '"') {
                tokens.push_back(lex_string(start));
            } else if (is_idchar(c)) {
                const auto begin = pos_;
                while (pos_ < text_.size() && is_idchar(text_[pos_])) advance(1);
                std::string lexeme(text_.substr(begin, pos_ - begin));
                tokens.push_back({classify_atom(lexeme), std::move(lexeme), {}, start});
            } else {
                throw ParseError(std::string("unexpected character '") + c + "'", start);
            }
        }
        return tokens;
    }

  private:
    SourceSpan span() const { return {line_, column_, pos_}; }

    void advance(std::size_t n) {
        for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
            if (text_[pos_] == '\n') {
                ++line_;
                column_ = 1;
            } else {
                ++column_;
            }
            ++pos_;
        }
    }

    bool at(std::string_view s) const { return text_.substr(pos_).starts_with(s); }

    void skip_trivia() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                advance(1);
            } else if (at(";;")) {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance(1);
            } else if (at("(;")) {
                skip_block_comment();
            } else {
                return;
            }
        }
    }

    void skip_block_comment() {
        const SourceSpan start = span();
        int depth = 0;
        do {
            if (pos_ >= text_.size()) throw ParseError("unterminated block comment", start);
            if (at("(;")) {
                ++depth;
                advance(2);
            } else if (at(";)")) {
                --depth;
                advance(2);
            } else {
                advance(1);
            }
        } while (depth > 0);
    }

    Token lex_string(SourceSpan start) {
        const auto begin = pos_;
        advance(1);
        std::vector<std::uint8_t> bytes;
        for (;;) {
            if (pos_ >= text_.size() || text_[pos_] == '\n') throw ParseError("unterminated string", start);
            const char c = text_[pos_];
            if (c == '"') {
                advance(1);
                break;
            }
            if (c != '\\') {
                bytes.push_back(static_cast<std::uint8_t>(c));
                advance(1);
                continue;
            }
            const SourceSpan escape = span();
            if (pos_ + 1 >= text_.size()) throw ParseError("unterminated string", start);
            const char e = text_[pos_ + 1];
            switch (e) {
            case 'n': bytes.push_back('\n'); advance(2); break;
            case 't': bytes.push_back('\t'); advance(2); break;
            case 'r': bytes.push_back('\r'); advance(2); break;
            case '"': bytes.push_back('"'); advance(2); break;
            case '\'': bytes.push_back('\''); advance(2); break;
            case '\\': bytes.push_back('\\'); advance(2); break;
            default: {
                const int hi = hex_value(e);
                const int lo = pos_ + 2 < text_.size() ? hex_value(text_[pos_ + 2]) : -1;
                if (hi < 0 || lo < 0) throw ParseError("invalid escape in string", escape);
                bytes.push_back(static_cast<std::uint8_t>(hi * 16 + lo));
                advance(3);
            }
            }
        }
        return {TokenKind::string, std::string(text_.substr(begin, pos_ - begin)), std::move(bytes), start};
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t column_ = 1;
};

} // namespace

std::vector<Token> tokenize(std::string_view text) { return Lexer(text).run(); }

} // namespace protector::wat
