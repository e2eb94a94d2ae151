#pragma once

#include <stdexcept>
#include <string>

namespace shsic {

// Malformed or degenerate input data (bad files, zero-variance columns,
// dimension mismatches between user-supplied objects).
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure that makes a computation meaningless (degenerate
// Lipschitz constant, zero projection matrix where a direction is required).
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace shsic
