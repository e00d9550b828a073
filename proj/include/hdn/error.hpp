#pragma once

#include <stdexcept>
#include <string>

namespace hdn {

enum class ErrorKind {
    Format,
    Io,
    EmptyInput,
    Parameter,
    Shape,
    Degenerate,
    DegenerateAlignment,
    Divergence,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so the CLI can map it
// onto an exit code without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace hdn
