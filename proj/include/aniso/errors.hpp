#pragma once

#include <stdexcept>
#include <string>

namespace aniso {

// Raised when evaluation leaves the mathematical domain of an operation
// (division by a vanishing denominator, log/sqrt of a non-positive value,
// a metric that fails to be invertible at a probe point, ...).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when input text fails to parse; carries a 1-based character offset.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position)
        : std::runtime_error(what), pos(position) {}
    std::size_t pos;
};

// Raised when a structured input (spec file, tensor shape, rep request)
// violates its schema or a precondition.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace aniso
