#pragma once

#include <stdexcept>
#include <string>

namespace mfglm {

// Bad arguments or configuration supplied by the caller.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (files, shapes, missing subjects).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical procedure failed (factorization, too many failed replicates).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mfglm
