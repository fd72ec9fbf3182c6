#pragma once

#include <stdexcept>
#include <string>

namespace aftexp {

/// Broad failure category; the CLI maps each one to its own exit code.
enum class ErrorKind
{
    Usage,      // invalid arguments or configuration
    Data,       // malformed or degenerate input data
    Numerical   // a computation could not be carried out
};

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Data: return "data";
        case ErrorKind::Numerical: return "numerical";
    }
    return "unknown";
}

namespace detail {

inline void check_length(const char* what, long long actual, long long expected)
{
    if (actual != expected) {
        throw Error(ErrorKind::Usage,
                    std::string(what) + " has length " + std::to_string(actual) +
                        " but " + std::to_string(expected) + " was expected");
    }
}

} // namespace detail
} // namespace aftexp
