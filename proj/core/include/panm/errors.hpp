#pragma once

#include <stdexcept>
#include <string>

namespace panm {

// Base for everything thrown on purpose by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration. Message names the offending field.
struct ConfigError : Error {
    using Error::Error;
};

// Mathematically undefined request (epsilon = 1, empty support, ...).
struct DomainError : Error {
    using Error::Error;
};

// Loss or gradient came back non-finite.
struct EvaluationError : Error {
    using Error::Error;
};

// External data could not be parsed. Message carries the byte offset.
struct IngestError : Error {
    using Error::Error;
};

// Caller broke an API precondition.
struct ContractError : Error {
    using Error::Error;
};

}  // namespace panm
