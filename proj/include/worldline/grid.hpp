#pragma once

#include <cstddef>
#include <vector>

#include "worldline/errors.hpp"
#include "worldline/io.hpp"

namespace wl {

/// Uniform proper-time grid shared by noise synthesis and integration.
struct Grid {
    double tau_start = 0.0;
    double tau_end = 1.0;
    std::size_t n_steps = 1;

    double dt() const { return (tau_end - tau_start) / static_cast<double>(n_steps); }
    std::size_t size() const { return n_steps + 1; }
    double node(std::size_t m) const { return tau_start + dt() * static_cast<double>(m); }

    std::vector<double> nodes() const {
        std::vector<double> out(size());
        for (std::size_t m = 0; m < out.size(); ++m) out[m] = node(m);
        return out;
    }

    void validate() const {
        if (!(tau_end > tau_start)) throw validation_error("grid: tau_end must exceed tau_start");
        if (n_steps < 1) throw validation_error("grid: n_steps must be >= 1");
    }

    /// Noise resolvability: the UV cutoff must be resolved, dt * Lambda <= 0.5.
    void validate_resolution(double lambda_uv) const {
        validate();
        if (dt() * lambda_uv > 0.5 + 1e-12)
            throw validation_error("grid: dt*Lambda_uv = " + fmt_g15(dt() * lambda_uv) +
                                   " violates dt*Lambda_uv <= 0.5");
    }

    bool operator==(const Grid&) const = default;
};

}  // namespace wl
