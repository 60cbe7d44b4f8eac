#pragma once

#include <stdexcept>
#include <string>

namespace countsel {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter vector violates an invariant of its model specification.
/// `which()` names the failed invariant (e.g. "stationarity").
class ConstraintViolation : public Error {
public:
    explicit ConstraintViolation(std::string which)
        : Error("constraint violation: " + which), which_(std::move(which)) {}
    const std::string& which() const noexcept { return which_; }

private:
    std::string which_;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ContractionViolation : public Error {
public:
    using Error::Error;
};

class OptimFailure : public Error {
public:
    using Error::Error;
};

class SingularInformation : public Error {
public:
    using Error::Error;
};

class AllFitsFailed : public Error {
public:
    using Error::Error;
};

class FamilyMismatch : public Error {
public:
    using Error::Error;
};

/// Malformed count data; `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace countsel
