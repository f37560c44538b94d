#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace arh {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two objects live on different grids, or array sizes disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, negative variances, failed factorizations.
class NumericError : public Error {
public:
    using Error::Error;
};

/// The requested model has operator norm >= 1; no stationary solution.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Estimation is impossible: no empirical eigenvalue clears the floor
/// required by the truncation rule. Carries the offending 1-based index.
class EstimationError : public Error {
public:
    EstimationError(const std::string& msg, std::size_t index)
        : Error(msg), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

/// Tied or increasing adjacent eigenvalues make a spectral gap infinite.
class InfiniteGapError : public Error {
public:
    using Error::Error;
};

/// Not enough tiers or replicates to form a trend statistic.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Bad configuration file or command-line input.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace arh
