#pragma once

#include <stdexcept>
#include <string>

namespace ltcf {

/// Base class for all library errors. Subclasses map 1:1 onto CLI exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration (bad width/head combination, conflicting flags, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor shapes incompatible with the requested operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// API misuse (backward on a non-scalar, wrong color space, missing grads).
class UsageError : public Error {
public:
    using Error::Error;
};

/// A configured resource limit was exceeded (e.g. attention token budget).
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Dataset ingestion failure (missing files, undecodable images, mismatches).
class IngestError : public Error {
public:
    using Error::Error;
};

/// Non-finite values encountered during training or evaluation.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Filesystem / encoding failures.
class IoError : public Error {
public:
    using Error::Error;
};

/// Checkpoint file problems, split by cause so callers can react.
class CheckpointVersionError : public IoError {
public:
    using IoError::IoError;
};

class CheckpointShapeError : public IoError {
public:
    using IoError::IoError;
};

class CheckpointCorruptError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace ltcf
