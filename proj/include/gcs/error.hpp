#pragma once
#include <stdexcept>
#include <string>

namespace gcs {

// Error taxonomy mirrors the CLI exit codes: usage -> 2, data -> 3, numeric -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad inputs: malformed files, shape mismatches, out-of-range ids.
struct DataError : Error {
    using Error::Error;
};

// Numerical failure: non-finite values, failure to converge.
struct NumericError : Error {
    using Error::Error;
};

// Caller misuse: invalid option combinations, unknown suites.
struct UsageError : Error {
    using Error::Error;
};

} // namespace gcs
