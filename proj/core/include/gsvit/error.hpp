#pragma once

#include <stdexcept>
#include <string>

namespace gsvit {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes passed to an op.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Invalid hyperparameters, config file contents, or command-line usage.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent on-disk data: corpora, labels, frame files.
class DataError : public Error {
public:
    using Error::Error;
};

// Checkpoint container problems: bad magic, truncation, checksum mismatch.
class CheckpointError : public DataError {
public:
    using DataError::DataError;
};

// Non-finite values where finite ones are required (NaN loss, NaN softmax input).
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace gsvit
