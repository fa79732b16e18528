#pragma once

#include <stdexcept>
#include <string>

namespace crowd {

/// Malformed scenario files, invalid parameters, bad command-line values.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An optimization problem without a single admissible candidate.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solver breakdown: negative density, fully unreachable domain, etc.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace crowd
