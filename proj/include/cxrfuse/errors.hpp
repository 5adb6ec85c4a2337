// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cxrfuse {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or axes.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Invalid or degenerate configuration (bad fractions, empty corpus, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or unacceptable input data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical failure during optimization.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// Failure while scoring generated text.
class EvaluationError : public Error {
public:
    using Error::Error;
};

}  // namespace cxrfuse
