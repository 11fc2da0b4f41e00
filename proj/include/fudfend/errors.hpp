#pragma once

#include <stdexcept>
#include <string>

namespace fudfend {

// Caller misuse: bad arguments, API contract violations. CLI exit code 1.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad data: malformed records, missing labels, inconsistent corpora. CLI exit code 2.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or bounds mismatch in tensor operations.
struct ShapeError : UsageError {
    explicit ShapeError(const std::string& msg) : UsageError(msg) {}
};

// File could not be parsed; message carries the line number.
struct ParseError : InputError {
    ParseError(std::size_t line, const std::string& msg)
        : InputError("line " + std::to_string(line) + ": " + msg), line_no(line) {}
    std::size_t line_no;
};

// A sequence is shorter than the smallest window an operation needs.
// Callers may recover by zero-padding (see the detector pipeline).
struct SequenceTooShort : InputError {
    explicit SequenceTooShort(const std::string& msg) : InputError(msg) {}
};

// An internal verification (gradient check, freeze contract) failed. CLI exit code 3.
struct VerificationError : std::runtime_error {
    explicit VerificationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fudfend
