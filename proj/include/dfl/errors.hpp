#pragma once

#include <stdexcept>
#include <string>

namespace dfl {

// Thrown when a computation produces or would consume non-finite values.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when an operation violates a protocol rule (e.g. out-of-range send).
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dfl
