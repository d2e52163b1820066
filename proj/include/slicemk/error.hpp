#pragma once

#include <stdexcept>
#include <string>

namespace slicemk {

/// Failure categories. The numeric values of Config, Model and Guard are
/// the process exit codes used by the command-line tool.
enum class ErrorKind {
    Internal = 1,
    Config = 2,
    Model = 3,  ///< degenerate model, unbounded region or invalid strategy
    Guard = 4,  ///< an enumeration or iteration budget was exceeded
    Argument = 5,
    Convergence = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace slicemk
