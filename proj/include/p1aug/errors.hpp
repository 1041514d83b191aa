#pragma once

#include <stdexcept>
#include <string>

namespace p1aug {

/// Precondition violated by caller-supplied data (bad spin, non-Hermitian input, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative numerical routine did not reach its tolerance.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Eigenstate continuation could not resolve labels even at the minimum field step.
class TrackingFailure : public NumericalFailure {
public:
    TrackingFailure(const std::string& what, double field_gauss)
        : NumericalFailure(what), field_gauss_(field_gauss) {}

    double field_gauss() const noexcept { return field_gauss_; }

private:
    double field_gauss_;
};

} // namespace p1aug
