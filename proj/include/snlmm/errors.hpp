#pragma once

#include <stdexcept>
#include <string>

namespace snlmm {

/// Marginal covariance of some cluster is not positive definite.
class SingularModelError : public std::runtime_error {
public:
    explicit SingularModelError(const std::string& what) : std::runtime_error(what) {}
};

/// Design matrix is rank deficient.
class RankDeficientError : public std::runtime_error {
public:
    explicit RankDeficientError(const std::string& what) : std::runtime_error(what) {}
};

/// A score-based test was requested for a parameter estimated on the
/// boundary of the parameter space.
class BoundaryParameterError : public std::runtime_error {
public:
    explicit BoundaryParameterError(const std::string& what) : std::runtime_error(what) {}
};

/// Generic numerical failure (all k singular, non-PD information, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace snlmm
