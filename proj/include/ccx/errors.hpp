#pragma once

#include <stdexcept>

namespace ccx {

// Base class for recoverable codec/analysis errors. Contract violations
// (bad widths, oversized codes) throw std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The container envelope is not a valid CCX1 stream.
class FormatError : public Error {
public:
    using Error::Error;
};

// The payload decoded to an impossible state; also the usual symptom of a
// wrong key.
class CorruptStreamError : public Error {
public:
    using Error::Error;
};

// The stream ended before the declared content was consumed or reproduced.
class EndOfStreamError : public Error {
public:
    using Error::Error;
};

// Key material is missing or unusable for the requested generator.
class KeyError : public Error {
public:
    using Error::Error;
};

// Not enough data to run a statistical test at its validity floor.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

}  // namespace ccx
