#pragma once

#include <stdexcept>
#include <string>

namespace wl {

/// Invalid configuration or parameter (reported with the violated field).
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Query outside the domain of a trajectory or table.
struct range_error : std::runtime_error {
    explicit range_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical integration failed to converge within budget.
struct quadrature_error : std::runtime_error {
    explicit quadrature_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Linear-algebra or regularization failure (covariance not PSD, ...).
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Integrator blow-up; message names the first offending step.
struct instability_error : std::runtime_error {
    explicit instability_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Nonlinear fit did not converge to an interior optimum.
struct fit_error : std::runtime_error {
    explicit fit_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Missing or malformed files on disk.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace wl
