#pragma once

#include <stdexcept>
#include <string>

namespace wavelift {

/// Malformed input file (VXL1, HIER1, PYR1, CSV).
class ParseError : public std::runtime_error {
 public:
    explicit ParseError(const std::string& what) : std::runtime_error("parse error: " + what) {}
};

/// Objects that were supposed to agree (domain vs hierarchy, keys vs index sets) do not.
class StructuralError : public std::logic_error {
 public:
    explicit StructuralError(const std::string& what) : std::logic_error("structural error: " + what) {}
};

/// Problem too large for a dense verification routine.
class SizeError : public std::length_error {
 public:
    explicit SizeError(const std::string& what) : std::length_error("size error: " + what) {}
};

/// Residual variance of a fit is zero, so no t statistic exists.
class DegenerateVarianceError : public std::runtime_error {
 public:
    explicit DegenerateVarianceError(const std::string& what)
        : std::runtime_error("degenerate variance: " + what) {}
};

/// Design has no residual degrees of freedom.
class InsufficientDofError : public std::runtime_error {
 public:
    explicit InsufficientDofError(const std::string& what)
        : std::runtime_error("insufficient degrees of freedom: " + what) {}
};

}  // namespace wavelift
