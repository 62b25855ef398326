#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prlf {

// Caller broke a documented precondition (shape mismatch, out-of-range index, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A NaN or Inf reached a public operation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed dataset, checkpoint or config input. Carries the offending line when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& message)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const char* message) {
    if (!condition) throw ContractViolation(message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ContractViolation(message);
}

}  // namespace prlf
