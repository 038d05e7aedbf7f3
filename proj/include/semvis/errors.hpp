#pragma once

#include <stdexcept>
#include <string>

namespace semvis {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input is numerically degenerate (zero norm, empty sequence, ...).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// A caller-side precondition was violated.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A file did not match the expected on-disk format.
class FormatError : public Error {
public:
    using Error::Error;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace semvis
