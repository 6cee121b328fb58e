#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spai {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit ParseError(const std::string& what) : Error(what) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

/// Raised when a factorization or a Krylov step meets a nonpositive pivot or curvature.
class NotPositiveDefinite : public Error {
public:
    NotPositiveDefinite(const std::string& what, std::size_t index, double value)
        : Error(what + " (index " + std::to_string(index) + ", value " + std::to_string(value) + ")"),
          index_(index), value_(value) {}

    std::size_t index() const noexcept { return index_; }
    double value() const noexcept { return value_; }

private:
    std::size_t index_;
    double value_;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

} // namespace spai
