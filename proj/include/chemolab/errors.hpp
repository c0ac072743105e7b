#ifndef CHEMOLAB_ERRORS_HPP
#define CHEMOLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace chemolab {

/// Bad input: violated precondition, malformed config, mismatched grids.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure: blow-up, solver non-convergence, step-size underflow.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond) throw ValidationError(what);
}

} // namespace chemolab

#endif
