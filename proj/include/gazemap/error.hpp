#pragma once

#include <stdexcept>
#include <string>

namespace gazemap {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration value is out of range or unknown.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error("config error in '" + field + "': " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Malformed input record; `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// The 4-sigma gaze cone does not intersect the near plane as a bounded ellipse.
class GazeOutsideFrustumError : public Error {
public:
    using Error::Error;
};

class InvalidFrustumError : public Error {
public:
    using Error::Error;
};

/// A persisted map does not match the scene it is paired with.
class LayoutMismatchError : public Error {
public:
    using Error::Error;
};

}  // namespace gazemap
