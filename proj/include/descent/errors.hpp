#pragma once

#include <stdexcept>
#include <string>

namespace descent {

// Exit codes of the command-line tool map one-to-one onto these categories.
enum class ErrorKind { Validation = 1, Numerical = 2, Io = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Bad input: dimension mismatch, non-finite value, malformed config or file.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

// Non-convergence, failed certificates, decomposition residuals.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

// A matrix failed the full-rank check required by an estimator.
class RankError : public NumericalError {
public:
    explicit RankError(const std::string& what) : NumericalError(what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace descent
