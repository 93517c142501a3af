#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace astnet {

enum class ErrorKind {
    dimension,
    label,
    contract,
    numeric,
    format,
    determinism,
    io,
    usage,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& message) : Error(ErrorKind::dimension, message) {}
};

class LabelError : public Error {
public:
    explicit LabelError(const std::string& message) : Error(ErrorKind::label, message) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& message) : Error(ErrorKind::contract, message) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error(ErrorKind::numeric, message) {}
};

class DeterminismError : public Error {
public:
    explicit DeterminismError(const std::string& message)
        : Error(ErrorKind::determinism, message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error(ErrorKind::usage, message) {}
};

// Malformed file contents. `offset` is the byte position where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& message, std::uint64_t offset)
        : Error(ErrorKind::format, message + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace astnet
