#pragma once

#include <stdexcept>
#include <string>

namespace acdkit {

/// Failure categories; the CLI maps them onto exit codes.
enum class ErrorKind { config = 1, io = 2, numerical = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};
struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace acdkit
