#pragma once

#include <stdexcept>
#include <string>

namespace slen {

// Bad user input: malformed files, out-of-range options, empty data.
class input_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite objective, failed factorization, and similar numerical breakdowns.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace slen
