#pragma once

#include <stdexcept>
#include <string>

namespace labelflux {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed XML, network notes, config or IR text.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Network that cannot be compiled into a cascade.
class NetworkError : public Error {
public:
    using Error::Error;
};

/// Numerically singular cascade or step matrix.
class SingularSystemError : public Error {
public:
    SingularSystemError(const std::string& what, int weight)
        : Error(what), weight_(weight) {}
    [[nodiscard]] int weight() const noexcept { return weight_; }

private:
    int weight_;
};

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace labelflux
