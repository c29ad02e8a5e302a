#pragma once

#include <stdexcept>
#include <string>

namespace diakrit {

// Base class for all recoverable library errors. CLI maps these to exit 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed corpus or annotation data.
class DataError : public Error {
public:
    using Error::Error;
};

// Model file problems, with a machine-checkable reason.
class ModelFormatError : public Error {
public:
    enum class Kind { BadMagic, BadVersion, Truncated, ShapeMismatch, BadDescriptor };

    ModelFormatError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

} // namespace diakrit
