#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace convgraph {

// Caller supplied something that violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Internal state does not allow the operation (empty corpus, missing in-edges, shape mismatch).
class InvalidState : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Malformed serialized input. `offset` is the byte position where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace convgraph
