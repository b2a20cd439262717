#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lorasub {

// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input violates an operation's domain (non-finite entries, bad weights, ...).
struct InvalidInputError : Error {
    using Error::Error;
};

// Shape or rank precondition violated.
struct DimensionError : Error {
    using Error::Error;
};

// A matrix that must be (numerically) positive definite is not, even after
// regularization.
struct SingularError : Error {
    using Error::Error;
};

// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

// A blob on disk does not have the byte length the manifest promises.
struct CorruptBlobError : IoError {
    CorruptBlobError(const std::string& file, std::uint64_t expected, std::uint64_t actual)
        : IoError("corrupt blob '" + file + "': expected " + std::to_string(expected) +
                  " bytes, found " + std::to_string(actual)),
          file(file),
          expected_bytes(expected),
          actual_bytes(actual) {}

    std::string file;
    std::uint64_t expected_bytes;
    std::uint64_t actual_bytes;
};

// Manifest format string is not one this library reads.
struct UnsupportedFormatError : IoError {
    using IoError::IoError;
};

// Gradient descent left the basin (loss exceeded the divergence bound).
struct DivergenceError : Error {
    DivergenceError(const std::string& msg, int step) : Error(msg), step(step) {}
    int step;
};

}  // namespace lorasub
