#pragma once

#include <gsl/gsl_sf_expint.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "worldline/detector.hpp"
#include "worldline/errors.hpp"
#include "worldline/grid.hpp"
#include "worldline/parallel.hpp"
#include "worldline/quadrature.hpp"
#include "worldline/trajectory.hpp"

namespace wl {

/// Regularized state of the massless scalar field: sharp momentum cutoffs
/// [lambda_ir, lambda_uv] and inverse temperature beta (infinite = Minkowski
/// vacuum). The IR cutoff only shifts noise kernels by an additive constant;
/// every physical statistic downstream is cutoff-insensitive by construction.
struct FieldConfig {
    double lambda_ir = 1e-3;
    double lambda_uv = 50.0;
    double beta = std::numeric_limits<double>::infinity();

    bool is_vacuum() const { return std::isinf(beta); }

    void validate() const {
        if (!(lambda_ir > 0.0)) throw validation_error("field.lambda_ir must be > 0");
        if (!(lambda_uv > lambda_ir)) throw validation_error("field.lambda_uv must exceed lambda_ir");
        if (!(beta > 0.0)) throw validation_error("field.beta must be > 0 (or infinite for vacuum)");
    }
};

namespace detail {

inline double sgn0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline double cosint(double x) {
    gsl_sf_result r;
    int status = gsl_sf_Ci_e(x, &r);
    if (status != 0) throw numerical_error("Ci(" + fmt_g15(x) + ") failed, gsl status " + std::to_string(status));
    return r.val;
}

/// int_lambda^Lambda cos(k d)/k dk in closed form; the d -> 0 limit is
/// log(Lambda/lambda).
inline double cos_sector(double d, const FieldConfig& f) {
    double ad = std::abs(d);
    if (ad == 0.0) return std::log(f.lambda_uv / f.lambda_ir);
    return cosint(f.lambda_uv * ad) - cosint(f.lambda_ir * ad);
}

/// int_lambda^Lambda (coth(beta k/2) - 1) cos(k d)/k dk; the thermal excess
/// over vacuum. The integrand decays like exp(-beta k), so the upper limit is
/// effectively min(Lambda, 60/beta). Integrated in log k, which turns the
/// 1/k^2 spike at the IR cutoff into a plain exponential.
inline double thermal_excess_sector(double d, const FieldConfig& f) {
    double k_hi = std::min(f.lambda_uv, 60.0 / f.beta);
    if (k_hi <= f.lambda_ir) return 0.0;
    double ad = std::abs(d);
    auto integrand = [&](double y) {
        double k = std::exp(y);
        return 2.0 / std::expm1(f.beta * k) * std::cos(k * ad);
    };
    return adaptive_integral(integrand, std::log(f.lambda_ir), std::log(k_hi), 1e-10);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Influence kernels along worldline pairs. Conventions:
//   Z_ij = nu_ij + i mu_ij, with
//   nu_ij =  (e_i e_j / 2pi) int dk/k cos(k dt) cos(k dx)     (anticommutator)
//   mu_ij = -(e_i e_j / 2pi) int dk/k sin(k dt) cos(k dx)     (commutator)
// split into retarded (du = u_i - u_j) and advanced (dv = v_i - v_j) sectors.
// mu converges without cutoffs; nu carries the sharp [lambda, Lambda] window.
// ---------------------------------------------------------------------------

/// Commutator (dissipation/propagation) kernel, cutoff-independent closed
/// form. sgn(0) := 0, matching the principal-value limit at null contact.
inline double mu_kernel(double ei, double ej, const NullPoint& pi, const NullPoint& pj) {
    return -(ei * ej / 8.0) * (detail::sgn0(pi.u - pj.u) + detail::sgn0(pi.v - pj.v));
}

/// Anticommutator (noise/correlation) kernel in the Minkowski vacuum.
inline double nu_kernel(double ei, double ej, const NullPoint& pi, const NullPoint& pj, const FieldConfig& field) {
    field.validate();
    if (!field.is_vacuum()) throw validation_error("nu_kernel: field must be vacuum (beta infinite)");
    return ei * ej / (4.0 * M_PI) * (detail::cos_sector(pi.u - pj.u, field) + detail::cos_sector(pi.v - pj.v, field));
}

/// Anticommutator kernel for an initially thermal field state. The commutator
/// part is temperature-independent, so mu_kernel is shared with the vacuum.
inline double thermal_nu_kernel(double ei, double ej, const NullPoint& pi, const NullPoint& pj,
                                const FieldConfig& field) {
    field.validate();
    if (field.is_vacuum()) throw validation_error("thermal_nu_kernel: beta must be finite");
    double du = pi.u - pj.u, dv = pi.v - pj.v;
    double vac = ei * ej / (4.0 * M_PI) * (detail::cos_sector(du, field) + detail::cos_sector(dv, field));
    double exc = ei * ej / (4.0 * M_PI) *
                 (detail::thermal_excess_sector(du, field) + detail::thermal_excess_sector(dv, field));
    return vac + exc;
}

/// Dispatches on the field state.
inline double noise_kernel(double ei, double ej, const NullPoint& pi, const NullPoint& pj, const FieldConfig& field) {
    return field.is_vacuum() ? nu_kernel(ei, ej, pi, pj, field) : thermal_nu_kernel(ei, ej, pi, pj, field);
}

/// Retarded/advanced split. Retarded parts depend only on du, advanced parts
/// only on dv; each pair sums to the corresponding full kernel.
struct ZParts {
    double nu_r = 0.0, nu_a = 0.0, mu_r = 0.0, mu_a = 0.0;
};

inline ZParts z_split(double ei, double ej, const NullPoint& pi, const NullPoint& pj, const FieldConfig& field) {
    field.validate();
    if (!field.is_vacuum()) throw validation_error("z_split: field must be vacuum (beta infinite)");
    double du = pi.u - pj.u, dv = pi.v - pj.v;
    ZParts z;
    z.nu_r = ei * ej / (4.0 * M_PI) * detail::cos_sector(du, field);
    z.nu_a = ei * ej / (4.0 * M_PI) * detail::cos_sector(dv, field);
    z.mu_r = -(ei * ej / 8.0) * detail::sgn0(du);
    z.mu_a = -(ei * ej / 8.0) * detail::sgn0(dv);
    return z;
}

// ---------------------------------------------------------------------------
// Batch evaluation over a parameter grid.
// ---------------------------------------------------------------------------

struct KernelGrid {
    std::vector<double> grid_i, grid_j;
    Eigen::MatrixXd nu, mu, nu_r, nu_a, mu_r, mu_a;
};

inline KernelGrid kernel_grid(const DetectorConfig& det_i, const DetectorConfig& det_j,
                              const std::vector<double>& taus_i, const std::vector<double>& taus_j,
                              const FieldConfig& field) {
    field.validate();
    KernelGrid g;
    g.grid_i = taus_i;
    g.grid_j = taus_j;
    auto n_i = static_cast<Eigen::Index>(taus_i.size());
    auto n_j = static_cast<Eigen::Index>(taus_j.size());
    for (auto* m : {&g.nu, &g.mu, &g.nu_r, &g.nu_a, &g.mu_r, &g.mu_a}) m->resize(n_i, n_j);

    std::vector<NullPoint> pi(taus_i.size()), pj(taus_j.size());
    for (std::size_t r = 0; r < taus_i.size(); ++r) pi[r] = det_i.trajectory.null_coords(taus_i[r]);
    for (std::size_t c = 0; c < taus_j.size(); ++c) pj[c] = det_j.trajectory.null_coords(taus_j[c]);

    const bool vacuum = field.is_vacuum();
    parallel_chunks(taus_i.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) {
            for (std::size_t c = 0; c < taus_j.size(); ++c) {
                auto rr = static_cast<Eigen::Index>(r), cc = static_cast<Eigen::Index>(c);
                g.mu(rr, cc) = mu_kernel(det_i.e, det_j.e, pi[r], pj[c]);
                if (vacuum) {
                    ZParts z = z_split(det_i.e, det_j.e, pi[r], pj[c], field);
                    g.nu_r(rr, cc) = z.nu_r;
                    g.nu_a(rr, cc) = z.nu_a;
                    g.mu_r(rr, cc) = z.mu_r;
                    g.mu_a(rr, cc) = z.mu_a;
                    g.nu(rr, cc) = z.nu_r + z.nu_a;
                } else {
                    g.nu(rr, cc) = thermal_nu_kernel(det_i.e, det_j.e, pi[r], pj[c], field);
                    g.mu_r(rr, cc) = -(det_i.e * det_j.e / 8.0) * detail::sgn0(pi[r].u - pj[c].u);
                    g.mu_a(rr, cc) = -(det_i.e * det_j.e / 8.0) * detail::sgn0(pi[r].v - pj[c].v);
                    g.nu_r(rr, cc) = std::numeric_limits<double>::quiet_NaN();
                    g.nu_a(rr, cc) = std::numeric_limits<double>::quiet_NaN();
                }
            }
        }
    });
    return g;
}

inline KernelGrid kernel_grid(const DetectorConfig& det_i, const DetectorConfig& det_j, const Grid& grid,
                              const FieldConfig& field) {
    grid.validate();
    auto taus = grid.nodes();
    return kernel_grid(det_i, det_j, taus, taus, field);
}

// ---------------------------------------------------------------------------
// Quadrature oracle: direct numerical integration of the defining mode
// integrals over [lambda, Lambda]. Independent of the closed forms above
// (no special functions), used to certify them.
// ---------------------------------------------------------------------------

enum class KernelPart { Nu, Mu, NuR, NuA, MuR, MuA };

inline double quadrature_oracle(double ei, double ej, const NullPoint& pi, const NullPoint& pj,
                                const FieldConfig& field, KernelPart part) {
    field.validate();
    double du = pi.u - pj.u, dv = pi.v - pj.v;
    double lo = field.lambda_ir, hi = field.lambda_uv;
    double c = ei * ej / (4.0 * M_PI);
    switch (part) {
        case KernelPart::Nu:
            return c * (oscillatory_log_integral(Trig::Cos, du, lo, hi) +
                        oscillatory_log_integral(Trig::Cos, dv, lo, hi));
        case KernelPart::Mu:
            return -c * (oscillatory_log_integral(Trig::Sin, du, lo, hi) +
                         oscillatory_log_integral(Trig::Sin, dv, lo, hi));
        case KernelPart::NuR: return c * oscillatory_log_integral(Trig::Cos, du, lo, hi);
        case KernelPart::NuA: return c * oscillatory_log_integral(Trig::Cos, dv, lo, hi);
        case KernelPart::MuR: return -c * oscillatory_log_integral(Trig::Sin, du, lo, hi);
        case KernelPart::MuA: return -c * oscillatory_log_integral(Trig::Sin, dv, lo, hi);
    }
    return 0.0;
}

}  // namespace wl
