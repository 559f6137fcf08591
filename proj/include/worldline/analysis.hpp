#pragma once

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "worldline/dynamics.hpp"
#include "worldline/errors.hpp"
#include "worldline/grid.hpp"
#include "worldline/kernels.hpp"

namespace wl {

// ---------------------------------------------------------------------------
// Power spectral density
// ---------------------------------------------------------------------------

/// One-sided spectral density P(omega) normalized so that
/// sum(P * bin_width) equals the series variance (discrete Parseval,
/// Hann-window power compensated). MC errors come from across-realization
/// scatter of the segment-averaged periodograms.
struct SpectrumEstimate {
    std::vector<double> omega;
    std::vector<double> power;
    std::vector<double> mc_error;
    double bin_width = 0.0;
    std::size_t segments = 0;
    std::size_t realizations = 0;
    std::string window = "hann";
};

struct PsdOptions {
    std::size_t n_segments = 4;  // 50% overlap
};

inline SpectrumEstimate psd_estimate(const std::vector<std::vector<double>>& ensemble, double dt, double omega_ref,
                                     const PsdOptions& opts = {}) {
    if (ensemble.empty() || ensemble.front().size() < 16) throw validation_error("psd_estimate: series too short");
    const std::size_t len = ensemble.front().size();
    for (const auto& s : ensemble)
        if (s.size() != len) throw validation_error("psd_estimate: ragged ensemble");
    if (omega_ref > 0.0) {
        double duration = static_cast<double>(len - 1) * dt;
        if (duration < 4.0 * (2.0 * M_PI / omega_ref))
            throw validation_error("psd_estimate: window shorter than 4 periods of the reference frequency");
    }

    std::size_t nseg = std::max<std::size_t>(1, opts.n_segments);
    std::size_t seg_len = std::max<std::size_t>(16, 2 * len / (nseg + 1));
    seg_len = std::min(seg_len, len);
    std::size_t hop = std::max<std::size_t>(1, seg_len / 2);
    std::size_t nfft = 1;
    while (nfft < 2 * seg_len) nfft <<= 1;  // zero-pad to 2x, never beyond

    std::vector<double> w(seg_len);
    double U = 0.0;
    for (std::size_t i = 0; i < seg_len; ++i) {
        w[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(seg_len - 1)));
        U += w[i] * w[i];
    }
    U /= static_cast<double>(seg_len);

    const std::size_t n_bins = nfft / 2 + 1;
    const double d_omega = 2.0 * M_PI / (static_cast<double>(nfft) * dt);
    std::vector<double> mean(n_bins, 0.0), m2(n_bins, 0.0);

    Eigen::FFT<double> fft;
    std::vector<double> buf(nfft);
    std::vector<std::complex<double>> spec(nfft);
    std::size_t used_segments = 0;
    for (std::size_t r = 0; r < ensemble.size(); ++r) {
        std::vector<double> acc(n_bins, 0.0);
        std::size_t count = 0;
        for (std::size_t start = 0; start + seg_len <= len; start += hop) {
            for (std::size_t i = 0; i < seg_len; ++i) buf[i] = ensemble[r][start + i] * w[i];
            std::fill(buf.begin() + static_cast<long>(seg_len), buf.end(), 0.0);
            fft.fwd(spec, buf);
            for (std::size_t k = 0; k < n_bins; ++k) {
                double s2 = std::norm(spec[k]) * dt / (static_cast<double>(seg_len) * U);
                double fold = (k == 0 || k == nfft / 2) ? 1.0 : 2.0;
                acc[k] += s2 * fold / (2.0 * M_PI);
            }
            ++count;
        }
        if (count == 0) throw validation_error("psd_estimate: segment longer than series");
        used_segments = count;
        double invr = 1.0 / static_cast<double>(r + 1);
        for (std::size_t k = 0; k < n_bins; ++k) {
            double val = acc[k] / static_cast<double>(count);
            double d = val - mean[k];
            mean[k] += d * invr;
            m2[k] += d * (val - mean[k]);
        }
    }

    SpectrumEstimate out;
    out.bin_width = d_omega;
    out.segments = used_segments;
    out.realizations = ensemble.size();
    out.omega.resize(n_bins);
    out.power = mean;
    out.mc_error.assign(n_bins, 0.0);
    for (std::size_t k = 0; k < n_bins; ++k) out.omega[k] = d_omega * static_cast<double>(k);
    if (ensemble.size() > 1)
        for (std::size_t k = 0; k < n_bins; ++k)
            out.mc_error[k] = std::sqrt(m2[k] / static_cast<double>(ensemble.size() - 1) /
                                        static_cast<double>(ensemble.size()));
    return out;
}

// ---------------------------------------------------------------------------
// Kernel lag profiles and the Unruh temperature fit
// ---------------------------------------------------------------------------

struct LagProfile {
    std::vector<double> lags;
    std::vector<double> values;
};

/// Noise-kernel lag profile nu(tau_ref + lag/2, tau_ref - lag/2) along one
/// worldline. Lags whose null separations touch the cutoff windows are
/// dropped: the IR log regime needs lambda*|d| small, the UV asymptotic
/// regime needs Lambda*|d| large; outside those the profile is regulator
/// artifact, not field statistics.
inline LagProfile kernel_lag_profile(const DetectorConfig& det, const FieldConfig& field, double lag_lo,
                                     double lag_hi, std::size_t n, double tau_ref = 0.0) {
    if (!(lag_hi > lag_lo) || lag_lo <= 0.0 || n < 8) throw validation_error("kernel_lag_profile: bad lag window");
    field.validate();
    LagProfile prof;
    for (std::size_t k = 0; k < n; ++k) {
        double lag = lag_lo + (lag_hi - lag_lo) * static_cast<double>(k) / static_cast<double>(n - 1);
        NullPoint p1 = det.trajectory.null_coords(tau_ref + 0.5 * lag);
        NullPoint p2 = det.trajectory.null_coords(tau_ref - 0.5 * lag);
        double du = std::abs(p1.u - p2.u), dv = std::abs(p1.v - p2.v);
        if (field.lambda_ir * std::max(du, dv) > 0.3) continue;  // IR-contaminated
        if (field.lambda_uv * std::min(du, dv) < 2.0) continue;  // UV-contaminated
        prof.lags.push_back(lag);
        prof.values.push_back(noise_kernel(det.e, det.e, p1, p2, field));
    }
    if (prof.lags.size() < 8)
        throw validation_error("kernel_lag_profile: fewer than 8 cutoff-clean lags in window [" + fmt_g15(lag_lo) +
                               ", " + fmt_g15(lag_hi) + "]");
    return prof;
}

struct TemperatureFit {
    double T = 0.0;
    double residual = 0.0;  // rms misfit relative to the centered profile rms
    double lag_lo = 0.0, lag_hi = 0.0;
    std::size_t n_lags = 0;
};

namespace detail {

inline double log_sinh(double x) {
    // stable for large x: log(sinh x) = x - log 2 + log1p(-exp(-2x))
    if (x > 20.0) return x - M_LN2 + std::log1p(-std::exp(-2.0 * x));
    return std::log(std::sinh(x));
}

}  // namespace detail

/// Least-squares fit of a lag profile to the thermal family
///   -(ei ej / 2pi) log sinh(pi T lag) + const,
/// the constant eliminated by centering. Log-grid scan plus golden-section
/// refinement; T pinned at the tiny end of the scan reads as "consistent
/// with zero" (the T -> 0 limit of the family is the vacuum log profile).
inline TemperatureFit fit_temperature(const LagProfile& prof, double ei, double ej, const FieldConfig& field) {
    field.validate();
    const std::size_t n = prof.lags.size();
    if (n < 8 || prof.values.size() != n) throw validation_error("fit_temperature: profile too short");
    for (double v : prof.values)
        if (!std::isfinite(v)) throw fit_error("fit_temperature: non-finite profile value");

    double mean_y = 0.0, mean_lag = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mean_y += prof.values[k];
        mean_lag += prof.lags[k];
    }
    mean_y /= static_cast<double>(n);
    mean_lag /= static_cast<double>(n);

    const double amp = ei * ej / (2.0 * M_PI);
    auto sse = [&](double T) {
        double mm = 0.0;
        std::vector<double> model(n);
        for (std::size_t k = 0; k < n; ++k) {
            model[k] = -amp * detail::log_sinh(M_PI * T * prof.lags[k]);
            mm += model[k];
        }
        mm /= static_cast<double>(n);
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double d = (prof.values[k] - mean_y) - (model[k] - mm);
            s += d * d;
        }
        return s;
    };

    const double t_lo = 1e-4 / mean_lag, t_hi = 100.0 / mean_lag;
    const int n_scan = 240;
    double best_t = t_lo, best_s = std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i < n_scan; ++i) {
        double T = t_lo * std::pow(t_hi / t_lo, static_cast<double>(i) / (n_scan - 1));
        double s = sse(T);
        if (s < best_s) {
            best_s = s;
            best_t = T;
            best_i = i;
        }
    }
    if (best_i == n_scan - 1)
        throw fit_error("fit_temperature: optimum at upper scan boundary T = " + fmt_g15(best_t) +
                        "; profile steeper than any thermal family");

    // golden-section refinement around the scan minimum
    double a = t_lo * std::pow(t_hi / t_lo, static_cast<double>(std::max(0, best_i - 1)) / (n_scan - 1));
    double b = t_lo * std::pow(t_hi / t_lo, static_cast<double>(best_i + 1) / (n_scan - 1));
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = sse(x1), f2 = sse(x2);
    for (int it = 0; it < 120 && (b - a) > 1e-12 * b; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = sse(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = sse(x2);
        }
    }

    TemperatureFit fit;
    fit.T = 0.5 * (a + b);
    double y2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) y2 += (prof.values[k] - mean_y) * (prof.values[k] - mean_y);
    fit.residual = std::sqrt(sse(fit.T) / std::max(y2, 1e-300));
    fit.lag_lo = prof.lags.front();
    fit.lag_hi = prof.lags.back();
    fit.n_lags = n;
    return fit;
}

// ---------------------------------------------------------------------------
// Fluctuation-dissipation residual
// ---------------------------------------------------------------------------

/// Windowed lag-domain transforms of the single-trajectory kernels, with the
/// convention  f_hat(omega) = h * sum_m w_m f(lag_m) exp(+i omega lag_m).
/// In the vacuum the pair obeys nu_hat(omega) = i sgn(omega) mu_hat(omega)
/// per null sector; the residual is the normalized worst deviation over the
/// mid-band. The first few bins are excluded: the window main lobe smears
/// the IR peak of nu_hat across them.
inline double fdr_residual_profiles(const std::vector<double>& nu, const std::vector<double>& mu, double half_span,
                                    double lambda_ir, double lambda_uv, std::size_t guard_bins = 6) {
    const std::size_t n = nu.size();
    if (n < 16 || mu.size() != n || n % 2 == 0) throw validation_error("fdr residual: need odd-length lag profiles");
    const double L = half_span;
    const double h = 2.0 * L / static_cast<double>(n - 1);
    auto n_hi = static_cast<std::size_t>(std::floor(0.5 * lambda_uv * L / M_PI));
    auto n_lo = std::max<std::size_t>(guard_bins, static_cast<std::size_t>(std::ceil(2.0 * lambda_ir * L / M_PI)));
    if (n_lo >= n_hi) throw validation_error("fdr residual: empty band between cutoffs at this resolution");

    double max_dev = 0.0, max_nu = 0.0;
    for (std::size_t b = n_lo; b <= n_hi; ++b) {
        double om = M_PI * static_cast<double>(b) / L;
        std::complex<double> nuh(0.0, 0.0), muh(0.0, 0.0);
        for (std::size_t m = 0; m < n; ++m) {
            double lag = -L + h * static_cast<double>(m);
            double w = 0.5 * (1.0 + std::cos(M_PI * lag / L));
            std::complex<double> ph = std::polar(1.0, om * lag);
            nuh += w * nu[m] * ph;
            muh += w * mu[m] * ph;
        }
        nuh *= h;
        muh *= h;
        max_dev = std::max(max_dev, std::abs(nuh - std::complex<double>(0.0, 1.0) * muh));
        max_nu = std::max(max_nu, std::abs(nuh));
    }
    return max_dev / std::max(max_nu, 1e-300);
}

/// Vacuum fluctuation-dissipation check on a stationary worldline; the lag
/// span and resolution are taken from the grid.
inline double fdr_residual(const DetectorConfig& det, const Grid& grid, const FieldConfig& field) {
    grid.validate();
    field.validate();
    if (det.trajectory.kind() != TrajectoryKind::Static && det.trajectory.kind() != TrajectoryKind::Inertial)
        throw validation_error("fdr_residual: requires a stationary (static or inertial) worldline");
    const double L = 0.5 * (grid.tau_end - grid.tau_start);
    auto half = static_cast<std::size_t>(std::llround(L / grid.dt()));
    const std::size_t n = 2 * half + 1;
    std::vector<double> nu(n), mu(n);
    for (std::size_t m = 0; m < n; ++m) {
        double lag = grid.dt() * (static_cast<double>(m) - static_cast<double>(half));
        NullPoint p1 = det.trajectory.null_coords(0.5 * lag);
        NullPoint p2 = det.trajectory.null_coords(-0.5 * lag);
        nu[m] = nu_kernel(det.e, det.e, p1, p2, field);
        mu[m] = mu_kernel(det.e, det.e, p1, p2);
    }
    return fdr_residual_profiles(nu, mu, grid.dt() * static_cast<double>(half), field.lambda_ir, field.lambda_uv);
}

// ---------------------------------------------------------------------------
// Correlation-propagation check
// ---------------------------------------------------------------------------

/// Fraction of windowed spectral power at negative frequencies for a complex
/// series on a uniform abscissa, convention F(omega) = sum Z_m exp(+i omega s_m).
/// The windowed mean is subtracted and the DC bin plus its Hann main lobe
/// (+-2 bins) are excluded: they carry the IR-cutoff additive constant,
/// which is physically unconstrained.
inline double negative_power_fraction(const std::vector<std::complex<double>>& Z, double half_span,
                                      std::size_t guard_bins = 2) {
    const std::size_t n = Z.size();
    if (n < 16 || n % 2 == 0) throw validation_error("negative_power_fraction: need odd-length series");
    const double S = half_span;
    const double h = 2.0 * S / static_cast<double>(n - 1);
    auto half = static_cast<std::size_t>(n / 2);

    std::vector<double> w(n);
    std::complex<double> wmean(0.0, 0.0);
    double wsum = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
        double s = -S + h * static_cast<double>(m);
        w[m] = 0.5 * (1.0 + std::cos(M_PI * s / S));
        wmean += w[m] * Z[m];
        wsum += w[m];
    }
    wmean /= wsum;

    double neg = 0.0, tot = 0.0;
    for (long b = -static_cast<long>(half); b <= static_cast<long>(half); ++b) {
        if (static_cast<std::size_t>(std::labs(b)) <= guard_bins) continue;
        double om = M_PI * static_cast<double>(b) / S;
        std::complex<double> F(0.0, 0.0);
        for (std::size_t m = 0; m < n; ++m) {
            double s = -S + h * static_cast<double>(m);
            F += w[m] * (Z[m] - wmean) * std::polar(1.0, om * s);
        }
        double p = std::norm(F);
        tot += p;
        if (b < 0) neg += p;
    }
    if (!(tot > 0.0)) throw validation_error("negative_power_fraction: zero total power");
    return neg / tot;
}

struct CorrPropResult {
    std::optional<double> negative_fraction;  // empty = skipped
    std::string skip_reason;
};

/// One-sidedness of the retarded kernel Z^r as a function of retarded lag
/// u_i - u_j over the common support of the two switched-on worldline
/// segments. Pairs with no common retarded support (a horizon between them)
/// are reported as an explicit skip, not a number.
inline CorrPropResult correlation_propagation_check(const DetectorConfig& det_i, const DetectorConfig& det_j,
                                                    const Grid& grid, const FieldConfig& field) {
    grid.validate();
    field.validate();
    auto on_segment = [&](const DetectorConfig& d) -> std::optional<std::pair<double, double>> {
        double lo = std::max(grid.tau_start, d.sw.tau_on);
        if (lo >= grid.tau_end) return std::nullopt;
        return std::make_pair(d.trajectory.null_coords(lo).u, d.trajectory.null_coords(grid.tau_end).u);
    };
    auto seg_i = on_segment(det_i), seg_j = on_segment(det_j);
    CorrPropResult out;
    if (!seg_i || !seg_j) {
        out.skip_reason = "a detector is never switched on within the grid";
        return out;
    }
    double lo = std::max(seg_i->first, seg_j->first);
    double hi = std::min(seg_i->second, seg_j->second);
    if (!(hi > lo)) {
        out.skip_reason = "no common retarded support (causal vacuity)";
        return out;
    }
    const double S = 0.5 * (hi - lo);
    std::size_t half = std::min<std::size_t>(grid.n_steps / 2, 2000);
    if (half < 16) throw validation_error("correlation_propagation_check: insufficient lag coverage");
    const std::size_t n = 2 * half + 1;
    std::vector<std::complex<double>> Z(n);
    for (std::size_t m = 0; m < n; ++m) {
        double s = -S + 2.0 * S * static_cast<double>(m) / static_cast<double>(n - 1);
        double nu_r = det_i.e * det_j.e / (4.0 * M_PI) * detail::cos_sector(s, field);
        double mu_r = -(det_i.e * det_j.e / 8.0) * detail::sgn0(s);
        Z[m] = {nu_r, mu_r};
    }
    out.negative_fraction = negative_power_fraction(Z, S);
    return out;
}

// ---------------------------------------------------------------------------
// Equilibrium statistics
// ---------------------------------------------------------------------------

struct EquilibriumStats {
    double mean_Q = 0.0, var_Q = 0.0, var_Qd = 0.0;
    double mc_mean_Q = 0.0, mc_var_Q = 0.0, mc_var_Qd = 0.0;
    double window_lo = 0.0, window_hi = 0.0;
    std::size_t nodes = 0;
};

/// Window-averaged late-time ensemble statistics for one detector. The
/// window must start past the switch-on transient, tau_on + width + 10/c_diss.
/// MC errors use the per-node Gaussian formulas with the realization count
/// (conservative: no credit for window averaging).
inline EquilibriumStats equilibrium_stats(const SimulationResult& res, const DetectorConfig& det,
                                          std::size_t detector_index, double window_lo, double window_hi) {
    if (detector_index >= res.n_detectors) throw validation_error("equilibrium_stats: detector index out of range");
    double t_end = transient_end(det);
    if (!(window_hi > window_lo)) throw validation_error("equilibrium_stats: empty window");
    if (window_lo < t_end)
        throw validation_error("equilibrium_stats: window start " + fmt_g15(window_lo) +
                               " overlaps the transient (ends at " + fmt_g15(t_end) + ")");
    EquilibriumStats st;
    st.window_lo = window_lo;
    st.window_hi = window_hi;
    for (std::size_t m = 0; m < res.grid.size(); ++m) {
        double tau = res.grid.node(m);
        if (tau < window_lo || tau > window_hi) continue;
        st.mean_Q += res.mean_Q[detector_index][m];
        st.var_Q += res.var_Q[detector_index][m];
        st.var_Qd += res.var_Qd[detector_index][m];
        ++st.nodes;
    }
    if (st.nodes == 0) throw validation_error("equilibrium_stats: window contains no grid nodes");
    st.mean_Q /= static_cast<double>(st.nodes);
    st.var_Q /= static_cast<double>(st.nodes);
    st.var_Qd /= static_cast<double>(st.nodes);
    auto nr = static_cast<double>(std::max<std::size_t>(res.n_realizations, 2));
    st.mc_mean_Q = std::sqrt(st.var_Q / nr);
    st.mc_var_Q = st.var_Q * std::sqrt(2.0 / (nr - 1.0));
    st.mc_var_Qd = st.var_Qd * std::sqrt(2.0 / (nr - 1.0));
    return st;
}

inline EquilibriumStats equilibrium_stats(const SimulationResult& res, const DetectorConfig& det,
                                          std::size_t detector_index) {
    return equilibrium_stats(res, det, detector_index, transient_end(det), res.grid.tau_end);
}

}  // namespace wl
