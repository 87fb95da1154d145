#pragma once

#include <stdexcept>
#include <string>

namespace cosmos {

// Caller violated an operation's precondition (bad arguments, wrong schema, ...).
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input value outside the operation's mathematical domain.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class ParseErrorKind {
    Malformed,        // input is not structurally parseable
    SchemaViolation,  // parseable, but wrong/missing/extra/reordered parts
    ValueError,       // right structure, value outside its domain
};

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ParseErrorKind kind() const { return kind_; }

    static const char* kind_name(ParseErrorKind k) {
        switch (k) {
            case ParseErrorKind::Malformed: return "MALFORMED";
            case ParseErrorKind::SchemaViolation: return "SCHEMA_VIOLATION";
            case ParseErrorKind::ValueError: return "VALUE_ERROR";
        }
        return "UNKNOWN";
    }

private:
    ParseErrorKind kind_;
};

}  // namespace cosmos
