#pragma once

#include <stdexcept>
#include <string>

namespace drsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: malformed documents, out-of-range parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Structural problems such as vectors of the wrong length or missing keys.
class SchemaError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Well-formed input that violates a model invariant (negative capacity, NaN, ...).
class ValidationError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class MeasurementError : public Error {
public:
    using Error::Error;
};

/// The price box cannot reach the DRE target.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, double max_achievable, double required)
        : Error(what), max_achievable_(max_achievable), required_(required) {}

    double max_achievable() const noexcept { return max_achievable_; }
    double required() const noexcept { return required_; }

private:
    double max_achievable_;
    double required_;
};

/// Step size outside the range where the contraction constant is below one.
class CertifiedRegimeError : public Error {
public:
    using Error::Error;
};

/// An iteration left the region the divergence guard allows.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// The dual interval [0, Lambda] is too narrow to contain the saddle multiplier.
class DualCapError : public Error {
public:
    DualCapError(const std::string& what, double lambda_star, double cap)
        : Error(what), lambda_star_(lambda_star), cap_(cap) {}

    double lambda_star() const noexcept { return lambda_star_; }
    double cap() const noexcept { return cap_; }

private:
    double lambda_star_;
    double cap_;
};

}  // namespace drsim
