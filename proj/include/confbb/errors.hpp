#pragma once

#include <stdexcept>
#include <string>

namespace confbb {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class SingularFit : public Error {
public:
    using Error::Error;
};

class IllConditioned : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class UnsupportedModel : public Error {
public:
    using Error::Error;
};

/// Iterative fit stopped at the iteration cap with a gradient norm above tolerance.
class ConvergenceFailure : public Error {
public:
    ConvergenceFailure(const std::string& what, double grad_norm)
        : Error(what + " (final gradient norm " + std::to_string(grad_norm) + ")"),
          final_grad_norm(grad_norm) {}

    double final_grad_norm;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidParameter(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace detail
}  // namespace confbb
