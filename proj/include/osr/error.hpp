#pragma once

#include <stdexcept>
#include <string>

namespace osr {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input, out-of-range hyperparameters, inconsistent files.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A numerical stage (MAV computation, Weibull fit) could not produce a result.
class ComputeError : public Error {
public:
    using Error::Error;
};

} // namespace osr
