#pragma once

#include <stdexcept>
#include <string>

namespace pilae {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Violated precondition or malformed configuration value.
struct ArgumentError : Error {
    explicit ArgumentError(const std::string& what) : Error(what) {}
};

// An iterative kernel failed to converge or produced non-finite values.
struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(what) {}
};

// Training could not proceed (degenerate input, diverging optimizer).
struct TrainError : Error {
    explicit TrainError(const std::string& what) : Error(what) {}
};

struct DivergenceError : TrainError {
    explicit DivergenceError(const std::string& what) : TrainError(what) {}
};

// File-level problems: missing files, unreadable streams.
struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

// Malformed input content. Carries a 1-based line number when one is known.
struct ParseError : Error {
    explicit ParseError(const std::string& what, long line_no = -1)
        : Error(line_no > 0 ? what + " (line " + std::to_string(line_no) + ")" : what),
          line(line_no) {}
    long line;
};

// Model-file specific failures, each with its own type so callers can
// distinguish corruption from version or structural problems.
struct ModelFormatError : IoError {
    explicit ModelFormatError(const std::string& what) : IoError(what) {}
};
struct BadMagicError : ModelFormatError {
    explicit BadMagicError(const std::string& what) : ModelFormatError(what) {}
};
struct UnknownVersionError : ModelFormatError {
    explicit UnknownVersionError(const std::string& what) : ModelFormatError(what) {}
};
struct ChecksumError : ModelFormatError {
    explicit ChecksumError(const std::string& what) : ModelFormatError(what) {}
};
struct ShapeChainError : ModelFormatError {
    explicit ShapeChainError(const std::string& what) : ModelFormatError(what) {}
};

}  // namespace pilae
