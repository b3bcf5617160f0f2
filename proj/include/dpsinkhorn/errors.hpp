#pragma once

#include <stdexcept>
#include <string>

namespace dpsinkhorn {

// Exit-code contract shared with the CLI: 0 success, 2 validation,
// 3 IO, 4 numerical failure.
enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 2,
    kExitIo = 3,
    kExitNumerical = 4,
};

// Base class for all toolkit errors; carries the process exit code the
// CLI maps the error to.
class Error : public std::runtime_error {
public:
    Error(std::string msg, int exit_code)
        : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

// Bad arguments, malformed configs, contract violations.
class ValidationError : public Error {
public:
    explicit ValidationError(std::string msg) : Error(std::move(msg), kExitValidation) {}
};

// Filesystem and file-format failures.
class IoError : public Error {
public:
    explicit IoError(std::string msg) : Error(std::move(msg), kExitIo) {}
};

// IDX parse failures, one type per failure mode so callers can tell them apart.
class IdxBadMagicError : public IoError {
public:
    explicit IdxBadMagicError(std::string msg) : IoError(std::move(msg)) {}
};

class IdxUnsupportedTypeError : public IoError {
public:
    explicit IdxUnsupportedTypeError(std::string msg) : IoError(std::move(msg)) {}
};

class IdxTruncatedError : public IoError {
public:
    IdxTruncatedError(std::string msg, size_t expected_bytes, size_t actual_bytes)
        : IoError(std::move(msg)), expected_bytes(expected_bytes), actual_bytes(actual_bytes) {}
    size_t expected_bytes;
    size_t actual_bytes;
};

// Divergence, NaN appearing mid-iteration, and similar numerical failures.
class NumericalError : public Error {
public:
    explicit NumericalError(std::string msg) : Error(std::move(msg), kExitNumerical) {}
};

}  // namespace dpsinkhorn
