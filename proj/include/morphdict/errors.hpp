#ifndef MORPHDICT_ERRORS_HPP
#define MORPHDICT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace morphdict {

// Bad arguments or misuse of an API contract. CLI exit code 1.
class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// File system and container problems. CLI exit code 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents (wrong magic, truncated payload, ...).
class FormatError : public IoError {
public:
    explicit FormatError(const std::string& msg) : IoError(msg) {}
};

// Numerical failure: divergence, non-convergence, NaN loss. CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation called out of sequence (e.g. backward without a cached forward).
class StateError : public std::logic_error {
public:
    explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

} // namespace morphdict

#endif // MORPHDICT_ERRORS_HPP
