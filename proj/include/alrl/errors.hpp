#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace alrl {

// Shapes that do not compose, invalid hyperparameters, missing preconditions.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// NaN/Inf produced by a numeric operation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed binary input; carries the byte offset where decoding failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Caller violated an operation's precondition (e.g. labeling an id twice).
class LogicError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class PoolExhaustedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace alrl
