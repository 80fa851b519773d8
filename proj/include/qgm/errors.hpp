#pragma once

#include <stdexcept>
#include <string>

namespace qgm {

/// Base class for all recoverable estimation errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class MissingConditioningColumn : public Error {
public:
    using Error::Error;
};

class EventTooSmall : public Error {
public:
    using Error::Error;
};

class ZeroColumn : public Error {
public:
    using Error::Error;
};

class DegenerateDesign : public Error {
public:
    using Error::Error;
};

class DegenerateInstrument : public Error {
public:
    using Error::Error;
};

class DegenerateLoading : public Error {
public:
    using Error::Error;
};

class Unbounded : public Error {
public:
    using Error::Error;
};

class MaxIterations : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class IndivisibleD : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class CholeskyFailure : public Error {
public:
    using Error::Error;
};

class CsvError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace qgm
