#pragma once

#include <stdexcept>
#include <string>

namespace ncd {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated mathematical precondition (zero vector, q > n, dimension mismatch, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inputs whose feature dimensions disagree.
class DimensionError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Malformed or unreadable artifact file.
class FormatError : public Error {
public:
    enum class Kind { BadMagic, BadVersion, Truncated, NonFinite, Invalid, Io };

    FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A stage input (file) that was configured but does not exist.
class MissingInputError : public Error {
public:
    using Error::Error;
};

}  // namespace ncd
