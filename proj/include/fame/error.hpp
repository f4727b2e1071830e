#pragma once

#include <stdexcept>
#include <string>

namespace fame {

// Stable diagnostic taxonomy used by the CLI's machine-readable errors.
enum class ErrorKind { io, config, shape, numeric };

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::io: return "io";
        case ErrorKind::config: return "config";
        case ErrorKind::shape: return "shape";
        case ErrorKind::numeric: return "numeric";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace fame
