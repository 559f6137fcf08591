#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "worldline/errors.hpp"
#include "worldline/io.hpp"

namespace wl {

enum class Trig { Cos, Sin };

namespace detail {

// 12-point Gauss-Legendre rule on [-1, 1] (positive half; rule is symmetric).
inline constexpr double kGL12x[6] = {0.1252334085114689, 0.3678314989981802, 0.5873179542866175,
                                     0.7699026741943047, 0.9041172563704749, 0.9815606342467192};
inline constexpr double kGL12w[6] = {0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
                                     0.1600783285433462, 0.1069393259953184, 0.0471753363865118};

template <class F>
double gl12(const F& f, double a, double b) {
    double c = 0.5 * (b - a), m = 0.5 * (a + b);
    double s = 0.0;
    for (int i = 0; i < 6; ++i)
        s += kGL12w[i] * (f(m + c * kGL12x[i]) + f(m - c * kGL12x[i]));
    return c * s;
}

/// Sums oscillation half-period panels of trig(k w)/k from kstart toward
/// +infinity and extrapolates the alternating partial sums by repeated
/// averaging. Requires w > 0.
template <class F>
double alternating_tail(const F& f, double kstart, double period, std::size_t nmax, double abs_tol) {
    std::vector<double> partial;
    partial.reserve(256);
    double sum = 0.0, kk = kstart;
    for (std::size_t i = 0; i < nmax; ++i) {
        double term = gl12(f, kk, kk + period);
        kk += period;
        sum += term;
        partial.push_back(sum);
        if (i > 8 && std::abs(term) < 1e-16) break;
    }
    // Euler-style repeated averaging; each level kills one order of the
    // slowly varying envelope.
    double prev = partial.back();
    std::size_t levels = partial.size() > 13 ? 12 : partial.size() - 1;
    for (std::size_t l = 0; l < levels; ++l) {
        for (std::size_t i = 0; i + 1 + l < partial.size(); ++i)
            partial[i] = 0.5 * (partial[i] + partial[i + 1]);
        prev = partial[partial.size() - 2 - l];
    }
    double result = partial[partial.size() - 1 - levels];
    if (std::abs(result - prev) > abs_tol)
        throw quadrature_error("oscillatory tail did not converge: last correction " +
                               fmt_g15(std::abs(result - prev)) + " at k = " + fmt_g15(kk));
    return result;
}

}  // namespace detail

/// Direct numerical evaluation of the mode integrals
///     int_lo^hi trig(k s) / k dk,   0 < lo < hi,
/// exact in s (cos branch is even, sin branch is odd). Smooth ranges use
/// log-spaced Gauss panels; ranges with many oscillations use half-period
/// panels with series acceleration for the far tail. Accuracy ~1e-12 absolute.
inline double oscillatory_log_integral(Trig trig, double s, double lo, double hi) {
    if (!(lo > 0.0) || !(hi > lo)) throw validation_error("oscillatory_log_integral: need 0 < lo < hi");
    const double w = std::abs(s);
    const double sign = (trig == Trig::Sin && s < 0) ? -1.0 : 1.0;
    if (w == 0.0) return trig == Trig::Cos ? std::log(hi / lo) : 0.0;

    auto f = [trig, w](double k) { return (trig == Trig::Cos ? std::cos(k * w) : std::sin(k * w)) / k; };
    auto smooth = [&](double a, double b) {
        // <= ~1.5 rad of phase per panel after log splitting
        int n = std::max(24, static_cast<int>(std::ceil(12.0 * std::log10(b / a))));
        double val = 0.0, prev = a;
        double r = std::pow(b / a, 1.0 / n);
        for (int i = 1; i <= n; ++i) {
            double next = (i == n) ? b : prev * r;
            val += detail::gl12(f, prev, next);
            prev = next;
        }
        return val;
    };

    if (w * hi <= 8.0) return sign * smooth(lo, hi);

    const double k1 = std::max(8.0 / w, lo);
    double val = (k1 > lo) ? smooth(lo, k1) : 0.0;

    const double period = M_PI / w;
    const double n_direct = (hi - k1) / period;
    if (n_direct <= 4000.0) {
        double kk = k1;
        auto n = static_cast<std::size_t>(n_direct);
        for (std::size_t i = 0; i < n; ++i) {
            val += detail::gl12(f, kk, kk + period);
            kk += period;
        }
        val += detail::gl12(f, kk, hi);
        return sign * val;
    }
    val += detail::alternating_tail(f, k1, period, 4000, 1e-11);
    val -= detail::alternating_tail(f, hi, period, 4000, 1e-11);
    return sign * val;
}

/// Adaptive Gauss-Kronrod on a finite interval; throws if the reported error
/// estimate exceeds the requested tolerance by two orders of magnitude.
template <class F>
double adaptive_integral(const F& f, double a, double b, double rel_tol = 1e-10) {
    double err = 0.0;
    double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 20, rel_tol, &err);
    double scale = std::max(1e-300, std::abs(val));
    if (err > 100.0 * rel_tol * scale && err > 1e-12)
        throw quadrature_error("adaptive quadrature error estimate " + fmt_g15(err) + " (value " + fmt_g15(val) +
                               ") on [" + fmt_g15(a) + ", " + fmt_g15(b) + "]");
    return val;
}

}  // namespace wl
