#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace repspace {

enum class ErrorKind {
    io,
    format,        // malformed or inconsistent file contents
    invariant,     // a domain invariant would be violated
    dimension,     // shapes do not agree
    degenerate,    // zero-norm vectors and similar undefined geometry
    undefined,     // statistic undefined for the input (e.g. zero variance)
    divergence,    // an iterative procedure produced a non-finite value
    usage,         // bad arguments
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) throw Error(kind, message);
}

}  // namespace repspace
