#include "protector/error.hpp"

namespace protector {

ParseError::ParseError(const std::string& message, SourceSpan span)
    : Error(std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + message),
      message_(message),
      span_(span) {}

} // namespace protector
