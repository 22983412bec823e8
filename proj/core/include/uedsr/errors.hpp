#pragma once

#include <stdexcept>
#include <string>

namespace uedsr {

// Base class for everything the library throws on purpose. Tools map
// ValidationError-derived failures to exit status 1 and the rest to 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input that the caller could have checked: geometry, ranges, config.
class ValidationError : public Error {
public:
    using Error::Error;
};

class GeometryError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class RangeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NeedsTwoFramesError : public ValidationError {
public:
    NeedsTwoFramesError() : ValidationError("event simulation needs at least two frames") {}
};

class DegenerateGeometryError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InsufficientSignalError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmptyReportError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Corrupt, truncated or missing files. The message names the file.
class IntegrityError : public Error {
public:
    IntegrityError(const std::string& path, const std::string& what);
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Raised by the training loop when a loss component stops being finite.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace uedsr
