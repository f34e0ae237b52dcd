#pragma once

#include <stdexcept>
#include <string>

namespace promet {

// Dataset or configuration cannot be used as requested (missing files,
// insufficient data for a sampling request, unknown labels, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text: CoNLL files, annotation files, episode records.
class ParseError : public DataError {
public:
    using DataError::DataError;
};

// Non-finite values in parameters, losses or optimizer updates.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace promet
