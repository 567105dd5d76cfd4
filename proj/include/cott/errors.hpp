#pragma once

#include <stdexcept>
#include <string>

namespace cott {

// Shape problems: mismatched dimensions, invalid shapes, rank violations.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Parameter outside its valid domain (eps <= 0, s_len < 1, chunk_len < 1, ...).
struct DomainError : std::domain_error {
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse, e.g. a backward call with a stale forward cache.
struct UsageError : std::logic_error {
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace cott
