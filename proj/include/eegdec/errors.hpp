#pragma once

#include <stdexcept>
#include <string>

namespace eegdec {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
struct IoError : Error {
    using Error::Error;
};

// File opened fine but its content is malformed.
struct ParseError : Error {
    using Error::Error;
};

// File carries a schema_version this build does not understand.
struct VersionError : Error {
    using Error::Error;
};

// Caller-supplied configuration or data violates a documented invariant.
struct ValidationError : Error {
    using Error::Error;
};

} // namespace eegdec
