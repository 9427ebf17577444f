#pragma once

#include <stdexcept>
#include <string>

namespace mips {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (bad sizes, k > N, non-unit rows).
class ContractViolation : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public ContractViolation {
public:
    using ContractViolation::ContractViolation;
};

// Anything that comes from the filesystem: missing files, unreadable or
// malformed payloads.
class IoError : public Error {
public:
    using Error::Error;
};

class FormatError : public IoError {
public:
    using IoError::IoError;
};

class ParseError : public FormatError {
public:
    ParseError(const std::string& what, std::size_t line)
        : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class TruncationError : public FormatError {
public:
    TruncationError(const std::string& path, std::size_t expected, std::size_t actual)
        : FormatError(path + ": truncated payload, expected " + std::to_string(expected) +
                      " bytes, found " + std::to_string(actual)),
          expected_(expected), actual_(actual) {}

    std::size_t expected_bytes() const noexcept { return expected_; }
    std::size_t actual_bytes() const noexcept { return actual_; }

private:
    std::size_t expected_;
    std::size_t actual_;
};

}  // namespace mips
