#pragma once

#include <stdexcept>
#include <string>

namespace albench {

/// Malformed input file (manifest, config, checkpoint, CSV).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input that parses but violates a contract (duplicate ids, bad formula, bad sizes).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite loss or parameters during optimisation.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace albench
