#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace toxpair {

// Base class for all library errors so callers can catch the whole family.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace toxpair
