#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace protector {

/// Position in a source text. Line and column are 1-based, offset is a byte offset.
struct SourceSpan {
    std::size_t line = 1;
    std::size_t column = 1;
    std::size_t offset = 0;

    friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Lexing or parsing failure. what() already includes "line:column".
class ParseError : public Error {
  public:
    ParseError(const std::string& message, SourceSpan span);

    [[nodiscard]] const SourceSpan& span() const noexcept { return span_; }
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

  private:
    std::string message_;
    SourceSpan span_;
};

/// A pass or embedding step refused the module.
class TransformError : public Error {
  public:
    using Error::Error;
};

/// Instantiation failed (unknown import, segment out of bounds).
class LinkError : public Error {
  public:
    using Error::Error;
};

/// Harness-level misuse of an instance: bad export name, argument mismatch, out-of-range poke.
class HarnessError : public Error {
  public:
    using Error::Error;
};

} // namespace protector
