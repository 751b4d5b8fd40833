#pragma once

#include <stdexcept>
#include <string>

namespace latkey {

// Error taxonomy shared by the library and the CLI. The CLI maps each kind
// to a process exit code (config -> 2, infeasible -> 3, numerical guard -> 4).
enum class ErrorKind {
    Config,
    Infeasible,
    NumericalGuard,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    int exit_code() const noexcept {
        switch (kind_) {
            case ErrorKind::Config: return 2;
            case ErrorKind::Infeasible: return 3;
            case ErrorKind::NumericalGuard: return 4;
        }
        return 1;
    }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(ErrorKind::Config, msg) {}
};

struct InfeasibleError : Error {
    explicit InfeasibleError(const std::string& msg) : Error(ErrorKind::Infeasible, msg) {}
};

struct NumericalGuardError : Error {
    explicit NumericalGuardError(const std::string& msg) : Error(ErrorKind::NumericalGuard, msg) {}
};

}  // namespace latkey
