#pragma once

#include <stdexcept>
#include <string>

namespace symrec {

// Exit-code classes used by the command line front end:
// ConfigError -> 2, DataError -> 3, NumericalError -> 4.

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace symrec
