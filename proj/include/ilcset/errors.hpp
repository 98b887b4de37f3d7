#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ilcset {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NonSquare : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

class Singular : public Error {
public:
    using Error::Error;
};

class NonFinite : public Error {
public:
    NonFinite(const std::string& what, std::size_t iteration)
        : Error(what), iteration_(iteration) {}
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class UnknownFunction : public ParseError {
public:
    using ParseError::ParseError;
};

class EvalError : public Error {
public:
    using Error::Error;
};

class RankDeficient : public Error {
public:
    using Error::Error;
};

/// A spectral-radius precondition failed at time step `k`.
class ConditionViolated : public Error {
public:
    ConditionViolated(const std::string& what, int k, double value)
        : Error(what), k_(k), value_(value) {}
    int k() const noexcept { return k_; }
    double value() const noexcept { return value_; }

private:
    int k_;
    double value_;
};

class ModelMismatch : public Error {
public:
    using Error::Error;
};

class MissingData : public Error {
public:
    using Error::Error;
};

class NotConverged : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace ilcset
