#pragma once

#include <stdexcept>
#include <string>

namespace vmbaro {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input: bad files, bad arguments, violated preconditions.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(what) {}
};

/// Numerical failure inside the DDE integrator (step-size underflow,
/// Newton non-convergence, non-finite right-hand side).
class SolverError : public Error {
public:
    SolverError(const std::string& what, double t_last)
        : Error(what + " (last accepted t = " + std::to_string(t_last) + ")"),
          last_t(t_last) {}
    double last_t;
};

/// Least-squares fit failure (rank deficiency, too few samples).
class FitError : public Error {
public:
    explicit FitError(const std::string& what) : Error(what) {}
};

} // namespace vmbaro
