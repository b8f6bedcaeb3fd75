#pragma once

#include <stdexcept>
#include <string>

namespace spg {

/// Error categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
    invalid_argument = 1,
    dimension_mismatch = 2,
    non_convergence = 3,
    sizing = 4,
    regime = 5,
    non_finite = 6,
    parse = 7,
    io = 8,
    collapse = 9,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised when an iterative solver exhausts its budget; carries the last residual.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double residual)
        : Error(ErrorCode::non_convergence, what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Raised when the requested state count cannot hold every component class.
class SizingError : public Error {
public:
    SizingError(const std::string& what, std::size_t required)
        : Error(ErrorCode::sizing, what), required_(required) {}
    std::size_t required_size() const noexcept { return required_; }

private:
    std::size_t required_;
};

} // namespace spg
