#pragma once

#include <stdexcept>
#include <string>

namespace upseg {

// Every error raised by the library derives from Error so callers can catch
// one type; the CLI maps the concrete types onto stable exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible tensor extents or channel counts.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Invalid configuration value (negative stage count, lr <= 0, bad key...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Value outside its admissible domain, e.g. a class index >= N_c.
class DomainError : public Error {
public:
    using Error::Error;
};

// API misuse: backward on a non-scalar, downscaling through upscale_prediction...
class UsageError : public Error {
public:
    using Error::Error;
};

// Malformed tensor container.
class FormatError : public Error {
public:
    using Error::Error;
};

// File system failure.
class IoError : public Error {
public:
    using Error::Error;
};

// Checkpoint parameters do not match the configured model.
class MismatchError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace upseg
