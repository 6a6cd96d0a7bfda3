#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace elex {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed netlist text. Carries the 1-based line number (0 when the
/// problem is not tied to a single line).
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A value outside its admissible range (negative resistance, kmax < 2, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A switch configuration produced a singular circuit matrix that could not
/// be resolved.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// An iteration (switch consistency, relaxation) did not settle.
class NonConvergenceError : public Error {
public:
    using Error::Error;
};

/// Control flow graph could not be built or evaluated.
class GraphError : public Error {
public:
    using Error::Error;
};

/// Event localization failed.
class EventError : public Error {
public:
    using Error::Error;
};

}  // namespace elex
