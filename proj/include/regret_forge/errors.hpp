#pragma once

#include <stdexcept>
#include <string>

namespace regret_forge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model data violates a structural invariant (probability rows, shapes).
class InvalidModel : public Error {
public:
    using Error::Error;
};

/// Bad arguments to a numeric routine.
class InvalidArgs : public Error {
public:
    using Error::Error;
};

/// A reachable state has two actions with exactly equal value.
class MarginZero : public Error {
public:
    using Error::Error;
};

class GenerationFailed : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    using Error::Error;
};

/// Every hypothesis assigns zero likelihood to the observed data.
class ImpossibleData : public Error {
public:
    using Error::Error;
};

class SolverDiverged : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace regret_forge
