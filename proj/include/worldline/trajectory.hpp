#pragma once

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>
#include <algorithm>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "worldline/errors.hpp"
#include "worldline/io.hpp"

namespace wl {

/// Event in 1+1D Minkowski space, natural units (c = 1).
struct Event {
    double t = 0.0;
    double x = 0.0;
};

/// Null coordinates u = t - x (retarded), v = t + x (advanced).
/// u + v = 2t and v - u = 2x reconstruct the event exactly.
struct NullPoint {
    double u = 0.0;
    double v = 0.0;

    static NullPoint from_event(const Event& e) { return {e.t - e.x, e.t + e.x}; }
    double t() const { return 0.5 * (u + v); }
    double x() const { return 0.5 * (v - u); }
};

/// True iff q lies in the causal future of p: both null coordinates
/// non-decreasing and at least one strictly increasing. Coincident points do
/// not precede each other, so this is a strict partial order.
inline bool causally_precedes(const NullPoint& p, const NullPoint& q) {
    return q.u >= p.u && q.v >= p.v && (q.u > p.u || q.v > p.v);
}

enum class TrajectoryKind { Static, Inertial, UniformlyAccelerated, Tabulated };

inline const char* to_string(TrajectoryKind k) {
    switch (k) {
        case TrajectoryKind::Static: return "static";
        case TrajectoryKind::Inertial: return "inertial";
        case TrajectoryKind::UniformlyAccelerated: return "uniformly_accelerated";
        case TrajectoryKind::Tabulated: return "tabulated";
    }
    return "?";
}

/// A timelike worldline (t(tau), x(tau)) parametrized by proper time tau.
/// t(tau) is strictly increasing for every kind. Built-in families use
/// proper-time parametrizations:
///   static:        t = tau - tau0,            x = x0
///   inertial:      t = gamma (tau - tau0),    x = x0 + gamma v0 (tau - tau0)
///   accelerated:   t = sinh(a(tau - tau0))/a, x = x0 + cosh(a(tau - tau0))/a
/// Tabulated worldlines interpolate (tau, t, x) samples with monotone cubics.
/// Immutable after construction; safe for concurrent reads.
class Trajectory {
  public:
    static Trajectory make_static(double x0 = 0.0, double tau0 = 0.0) {
        Trajectory tr(TrajectoryKind::Static);
        tr.x0_ = x0;
        tr.tau0_ = tau0;
        return tr;
    }

    static Trajectory inertial(double v0, double x0 = 0.0, double tau0 = 0.0) {
        if (!(std::abs(v0) < 1.0))
            throw validation_error("trajectory.v0: |v0| must be < 1, got " + fmt_g15(v0));
        Trajectory tr(TrajectoryKind::Inertial);
        tr.v0_ = v0;
        tr.gamma_ = 1.0 / std::sqrt(1.0 - v0 * v0);
        tr.x0_ = x0;
        tr.tau0_ = tau0;
        return tr;
    }

    static Trajectory uniformly_accelerated(double a, double x0 = 0.0, double tau0 = 0.0) {
        if (!(a > 0.0))
            throw validation_error("trajectory.a: acceleration must be > 0, got " + fmt_g15(a));
        Trajectory tr(TrajectoryKind::UniformlyAccelerated);
        tr.a_ = a;
        tr.x0_ = x0;
        tr.tau0_ = tau0;
        return tr;
    }

    static Trajectory tabulated(std::vector<double> tau, std::vector<double> t, std::vector<double> x) {
        if (tau.size() < 4 || t.size() != tau.size() || x.size() != tau.size())
            throw validation_error("tabulated trajectory needs >= 4 rows of (tau,t,x)");
        for (std::size_t i = 1; i < tau.size(); ++i) {
            if (!(tau[i] > tau[i - 1]))
                throw validation_error("tabulated trajectory: tau column not strictly increasing at row " +
                                       std::to_string(i));
            if (!(t[i] > t[i - 1]))
                throw validation_error("tabulated trajectory: t column not strictly increasing at row " +
                                       std::to_string(i));
        }
        Trajectory tr(TrajectoryKind::Tabulated);
        tr.tab_lo_ = tau.front();
        tr.tab_hi_ = tau.back();
        auto tau2 = tau;
        tr.t_of_tau_ = std::make_shared<interp_t>(std::move(tau), std::move(t));
        tr.x_of_tau_ = std::make_shared<interp_t>(std::move(tau2), std::move(x));
        // timelike check on the interpolant, nodes and midpoints
        const auto& grid = tr.table_tau();
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            for (double tt : {grid[i], 0.5 * (grid[i] + grid[i + 1])}) {
                double td = tr.t_of_tau_->prime(tt);
                double xd = tr.x_of_tau_->prime(tt);
                if (!(td > 0.0) || !(std::abs(xd) < td))
                    throw validation_error("tabulated trajectory not timelike near tau = " + fmt_g15(tt));
            }
        }
        return tr;
    }

    /// Loads CSV with header `tau,t,x`, strictly increasing first two columns.
    static Trajectory from_csv(const std::string& path) {
        std::istringstream in(read_text(path));
        std::string line;
        if (!std::getline(in, line)) throw io_error("empty worldline csv: " + path);
        auto strip = [](std::string s) {
            std::string r;
            for (char c : s)
                if (!std::isspace(static_cast<unsigned char>(c))) r += c;
            return r;
        };
        if (strip(line) != "tau,t,x")
            throw validation_error("worldline csv header must be 'tau,t,x': " + path);
        std::vector<double> tau, t, x;
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (strip(line).empty()) continue;
            std::istringstream ls(line);
            double a, b, c;
            char c1, c2;
            if (!(ls >> a >> c1 >> b >> c2 >> c) || c1 != ',' || c2 != ',')
                throw validation_error("worldline csv parse error at line " + std::to_string(row) + ": " + path);
            tau.push_back(a);
            t.push_back(b);
            x.push_back(c);
        }
        return tabulated(std::move(tau), std::move(t), std::move(x));
    }

    TrajectoryKind kind() const { return kind_; }
    double x0() const { return x0_; }
    double v0() const { return v0_; }
    double acceleration() const { return a_; }
    double tau0() const { return tau0_; }

    bool has_finite_domain() const { return kind_ == TrajectoryKind::Tabulated; }
    double domain_lo() const { return has_finite_domain() ? tab_lo_ : -std::numeric_limits<double>::infinity(); }
    double domain_hi() const { return has_finite_domain() ? tab_hi_ : std::numeric_limits<double>::infinity(); }

    Event position(double tau) const {
        switch (kind_) {
            case TrajectoryKind::Static: return {tau - tau0_, x0_};
            case TrajectoryKind::Inertial: {
                double s = tau - tau0_;
                return {gamma_ * s, x0_ + gamma_ * v0_ * s};
            }
            case TrajectoryKind::UniformlyAccelerated: {
                double s = a_ * (tau - tau0_);
                return {std::sinh(s) / a_, x0_ + std::cosh(s) / a_};
            }
            case TrajectoryKind::Tabulated:
                check_range(tau);
                return {(*t_of_tau_)(tau), (*x_of_tau_)(tau)};
        }
        return {};
    }

    /// Coordinate velocities (dt/dtau, dx/dtau).
    Event velocity(double tau) const {
        switch (kind_) {
            case TrajectoryKind::Static: return {1.0, 0.0};
            case TrajectoryKind::Inertial: return {gamma_, gamma_ * v0_};
            case TrajectoryKind::UniformlyAccelerated: {
                double s = a_ * (tau - tau0_);
                return {std::cosh(s), std::sinh(s)};
            }
            case TrajectoryKind::Tabulated:
                check_range(tau);
                return {t_of_tau_->prime(tau), x_of_tau_->prime(tau)};
        }
        return {};
    }

    /// Null coordinates in closed form per family; the exponential forms for
    /// hyperbolic motion avoid the sinh-cosh cancellation near the horizon.
    NullPoint null_coords(double tau) const {
        switch (kind_) {
            case TrajectoryKind::Static: return {tau - tau0_ - x0_, tau - tau0_ + x0_};
            case TrajectoryKind::Inertial: {
                double s = tau - tau0_;
                return {gamma_ * (1.0 - v0_) * s - x0_, gamma_ * (1.0 + v0_) * s + x0_};
            }
            case TrajectoryKind::UniformlyAccelerated: {
                double s = a_ * (tau - tau0_);
                return {-x0_ - std::exp(-s) / a_, x0_ + std::exp(s) / a_};
            }
            case TrajectoryKind::Tabulated: return NullPoint::from_event(position(tau));
        }
        return {};
    }

    /// (du/dtau, dv/dtau); both are > 0 on a future-directed timelike worldline.
    NullPoint null_rates(double tau) const {
        switch (kind_) {
            case TrajectoryKind::Static: return {1.0, 1.0};
            case TrajectoryKind::Inertial: return {gamma_ * (1.0 - v0_), gamma_ * (1.0 + v0_)};
            case TrajectoryKind::UniformlyAccelerated: {
                double s = a_ * (tau - tau0_);
                return {std::exp(-s), std::exp(s)};
            }
            case TrajectoryKind::Tabulated: {
                Event w = velocity(tau);
                return {w.t - w.x, w.t + w.x};
            }
        }
        return {};
    }

    /// Inverse of t(tau); unique by strict monotonicity. Closed form where
    /// available, bracketed root-find for tabulated worldlines.
    double time_inverse(double T) const {
        switch (kind_) {
            case TrajectoryKind::Static: return T + tau0_;
            case TrajectoryKind::Inertial: return T / gamma_ + tau0_;
            case TrajectoryKind::UniformlyAccelerated: return std::asinh(a_ * T) / a_ + tau0_;
            case TrajectoryKind::Tabulated: {
                double tlo = (*t_of_tau_)(tab_lo_), thi = (*t_of_tau_)(tab_hi_);
                if (T < tlo || T > thi)
                    throw range_error("time_inverse: T = " + fmt_g15(T) + " outside table range [" + fmt_g15(tlo) +
                                      ", " + fmt_g15(thi) + "]");
                return invert_monotone([this](double s) { return (*t_of_tau_)(s); }, T);
            }
        }
        return 0.0;
    }

    /// Inverse of u(tau) = t - x; empty if the value is never attained
    /// (e.g. beyond the horizon of hyperbolic motion, where u < -x0 always).
    std::optional<double> u_inverse(double u) const {
        switch (kind_) {
            case TrajectoryKind::Static: return u + x0_ + tau0_;
            case TrajectoryKind::Inertial: return (u + x0_) / (gamma_ * (1.0 - v0_)) + tau0_;
            case TrajectoryKind::UniformlyAccelerated: {
                double z = -a_ * (u + x0_);  // = exp(-a (tau - tau0))
                if (!(z > 0.0)) return std::nullopt;
                return -std::log(z) / a_ + tau0_;
            }
            case TrajectoryKind::Tabulated: {
                auto f = [this](double s) { Event e = position(s); return e.t - e.x; };
                if (u < f(tab_lo_) || u > f(tab_hi_)) return std::nullopt;
                return invert_monotone(f, u);
            }
        }
        return std::nullopt;
    }

    /// Inverse of v(tau) = t + x; empty if never attained.
    std::optional<double> v_inverse(double v) const {
        switch (kind_) {
            case TrajectoryKind::Static: return v - x0_ + tau0_;
            case TrajectoryKind::Inertial: return (v - x0_) / (gamma_ * (1.0 + v0_)) + tau0_;
            case TrajectoryKind::UniformlyAccelerated: {
                double z = a_ * (v - x0_);  // = exp(a (tau - tau0))
                if (!(z > 0.0)) return std::nullopt;
                return std::log(z) / a_ + tau0_;
            }
            case TrajectoryKind::Tabulated: {
                auto f = [this](double s) { Event e = position(s); return e.t + e.x; };
                if (v < f(tab_lo_) || v > f(tab_hi_)) return std::nullopt;
                return invert_monotone(f, v);
            }
        }
        return std::nullopt;
    }

    const std::vector<double>& table_tau() const {
        static const std::vector<double> empty;
        return t_of_tau_ ? t_of_tau_->abscissas() : empty;
    }

  private:
    // Monotone cubic Hermite (Fritsch-Carlson slope limiting): keeps monotone
    // data monotone, which preserves invertibility of t(tau).
    struct interp_t {
        std::vector<double> xs_, ys_, ss_;

        interp_t(std::vector<double> xs, std::vector<double> ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
            const std::size_t n = xs_.size();
            ss_.assign(n, 0.0);
            ss_[0] = (ys_[1] - ys_[0]) / (xs_[1] - xs_[0]);
            ss_[n - 1] = (ys_[n - 1] - ys_[n - 2]) / (xs_[n - 1] - xs_[n - 2]);
            for (std::size_t k = 1; k + 1 < n; ++k) {
                double h0 = xs_[k] - xs_[k - 1], h1 = xs_[k + 1] - xs_[k];
                double d0 = (ys_[k] - ys_[k - 1]) / h0, d1 = (ys_[k + 1] - ys_[k]) / h1;
                if (d0 * d1 <= 0.0) {
                    ss_[k] = 0.0;
                } else {
                    double w1 = 2.0 * h1 + h0, w2 = h1 + 2.0 * h0;
                    ss_[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
        }

        std::size_t interval(double x) const {
            auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
            auto i = static_cast<std::size_t>(std::distance(xs_.begin(), it));
            if (i == 0) return 0;
            if (i >= xs_.size()) return xs_.size() - 2;
            return i - 1;
        }

        double operator()(double x) const {
            std::size_t i = interval(x);
            double h = xs_[i + 1] - xs_[i], t = (x - xs_[i]) / h;
            double h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t), h10 = t * (1.0 - t) * (1.0 - t);
            double h01 = t * t * (3.0 - 2.0 * t), h11 = t * t * (t - 1.0);
            return h00 * ys_[i] + h * h10 * ss_[i] + h01 * ys_[i + 1] + h * h11 * ss_[i + 1];
        }

        double prime(double x) const {
            std::size_t i = interval(x);
            double h = xs_[i + 1] - xs_[i], t = (x - xs_[i]) / h;
            double g00 = 6.0 * t * (t - 1.0) / h, g10 = (1.0 - t) * (1.0 - 3.0 * t);
            double g01 = -g00, g11 = t * (3.0 * t - 2.0);
            return g00 * ys_[i] + g10 * ss_[i] + g01 * ys_[i + 1] + g11 * ss_[i + 1];
        }

        const std::vector<double>& abscissas() const { return xs_; }
    };

    explicit Trajectory(TrajectoryKind k) : kind_(k) {}

    void check_range(double tau) const {
        if (kind_ == TrajectoryKind::Tabulated && (tau < tab_lo_ || tau > tab_hi_))
            throw range_error("tau = " + fmt_g15(tau) + " outside table range [" + fmt_g15(tab_lo_) + ", " +
                              fmt_g15(tab_hi_) + "]");
    }

    template <class F>
    double invert_monotone(const F& f, double target) const {
        auto g = [&](double s) { return f(s) - target; };
        std::uintmax_t iters = 128;
        auto r = boost::math::tools::toms748_solve(g, tab_lo_, tab_hi_, boost::math::tools::eps_tolerance<double>(52),
                                                   iters);
        return 0.5 * (r.first + r.second);
    }

    TrajectoryKind kind_;
    double x0_ = 0.0, v0_ = 0.0, a_ = 1.0, tau0_ = 0.0, gamma_ = 1.0;
    double tab_lo_ = 0.0, tab_hi_ = 0.0;
    std::shared_ptr<interp_t> t_of_tau_, x_of_tau_;
};

}  // namespace wl
