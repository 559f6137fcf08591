#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "worldline/detector.hpp"
#include "worldline/errors.hpp"
#include "worldline/grid.hpp"
#include "worldline/kernels.hpp"
#include "worldline/noise.hpp"
#include "worldline/parallel.hpp"

namespace wl {

enum class IntegratorMode { Local, Memory };

inline const char* to_string(IntegratorMode m) { return m == IntegratorMode::Local ? "local" : "memory"; }

/// Coefficient of Qdot in the reduced local equation
///   Qddot + c_diss Qdot + Omega^2 Q = d/dtau(s eta).
/// The commutator kernel along any timelike worldline in proper-time
/// parametrization is -(e^2/4) sgn(tau - tau'), so the self-interaction is a
/// delta-function limit with weight c_diss = e^2/2, whatever the trajectory.
inline double local_damping_coefficient(const DetectorConfig& det) { return 0.5 * det.e * det.e; }

/// Time after which switch-on transients are considered damped out.
inline double transient_end(const DetectorConfig& det) {
    double c = local_damping_coefficient(det);
    if (!(c > 0.0)) return std::numeric_limits<double>::infinity();
    return det.sw.tau_on + det.sw.width + 10.0 / c;
}

/// True iff some point of detector j's switched-on worldline causally
/// precedes detector i's event at tau. Both null coordinates increase along
/// a worldline, so testing the switch-on point suffices. A detector with
/// back-reaction disabled never sources anything (mu_{.j} = 0 by flag).
inline bool causal_influence_active(const DetectorConfig& det_i, const DetectorConfig& det_j, double tau) {
    if (!det_j.backreaction_enabled) return false;
    double on = det_j.sw.tau_on;
    if (det_j.trajectory.has_finite_domain()) on = std::max(on, det_j.trajectory.domain_lo());
    return causally_precedes(det_j.trajectory.null_coords(on), det_i.trajectory.null_coords(tau));
}

/// Forcing series d/dtau(s_i eta_i) on the grid nodes.
/// Ramp switching differentiates the switched product by centered
/// differences (valid: the UV cutoff keeps eta smooth below scale 1/Lambda
/// and the grid enforces dt*Lambda <= 0.5). Step switching applies
/// s * (d eta/dtau) plus a discrete impulse of weight eta(tau_on) at the
/// switch node, the distributional derivative of the jump.
inline std::vector<double> forcing_series(const std::vector<double>& eta, const DetectorConfig& det,
                                          const Grid& grid) {
    if (eta.size() != grid.size()) throw validation_error("forcing_series: noise length does not match grid");
    const std::size_t n = grid.n_steps;
    const double dt = grid.dt();
    std::vector<double> F(n + 1, 0.0);
    auto centered = [&](const std::vector<double>& f, std::size_t m) {
        if (m == 0) return (f[1] - f[0]) / dt;
        if (m == n) return (f[n] - f[n - 1]) / dt;
        return (f[m + 1] - f[m - 1]) / (2.0 * dt);
    };
    if (det.sw.is_step()) {
        for (std::size_t m = 0; m <= n; ++m) F[m] = det.sw.value(grid.node(m)) * centered(eta, m);
        if (det.sw.tau_on > grid.tau_start && det.sw.tau_on <= grid.tau_end) {
            auto m_on = static_cast<std::size_t>(std::ceil((det.sw.tau_on - grid.tau_start) / dt - 1e-9));
            if (m_on <= n) F[m_on] += eta[m_on] / dt;
        }
    } else {
        std::vector<double> f(n + 1);
        for (std::size_t m = 0; m <= n; ++m) f[m] = det.sw.value(grid.node(m)) * eta[m];
        for (std::size_t m = 0; m <= n; ++m) F[m] = centered(f, m);
    }
    return F;
}

/// Ensemble (or single-realization) output: per-node ensemble moments plus
/// optionally retained full series.
struct SimulationResult {
    struct Realization {
        std::vector<std::vector<double>> Q, Qd;  // [detector][node]
        std::uint64_t substream = 0;
    };

    Grid grid{};
    std::size_t n_detectors = 0;
    IntegratorMode mode = IntegratorMode::Local;
    std::uint64_t seed = 0;
    std::size_t n_realizations = 0;
    double smoothing_eps = 0.0;

    std::vector<std::vector<double>> mean_Q, var_Q, mean_Qd, var_Qd;  // [detector][node]
    std::vector<Realization> kept;
    std::vector<std::uint64_t> substreams;
    std::vector<std::string> warnings;
    std::vector<std::vector<bool>> causal_gate;  // [receiver][source]
};

struct IntegrateOptions {
    std::vector<std::pair<double, double>> initial;  // (Q, Qdot) per detector; empty = all zeros
    std::size_t keep_realizations = 4;
};

/// Invoked in realization-index order during aggregation (deterministic
/// whatever the worker count).
using RealizationSink = std::function<void(std::size_t, const SimulationResult::Realization&)>;

namespace detail {

/// Precomputed geometry/switch data and the RK4 stepping core shared by both
/// integrator modes. Stage times live on a half-step lattice: index h = 2m is
/// node m, h = 2m+1 the midpoint. Detectors advance in rounds ordered by
/// coordinate-time step end, so cross pickups never reach further than one
/// step past another detector's history front.
class LangevinIntegrator {
  public:
    LangevinIntegrator(const std::vector<DetectorConfig>& dets, const Grid& grid, const FieldConfig& field,
                       IntegratorMode mode)
        : dets_(dets), grid_(grid), mode_(mode), n_(grid.n_steps), dt_(grid.dt()) {
        field.validate();
        grid.validate_resolution(field.lambda_uv);
        for (const auto& d : dets) {
            d.validate();
            if (d.omega * dt_ > 0.05 + 1e-12)
                throw validation_error("grid: dt*Omega = " + fmt_g15(d.omega * dt_) + " violates dt*Omega <= 0.05");
        }
        eps_ = std::max(dt_, 1.0 / field.lambda_uv);

        const std::size_t nh = 2 * n_ + 1;
        const std::size_t nd = dets.size();
        u_.assign(nd, std::vector<double>(nh));
        v_.assign(nd, std::vector<double>(nh));
        ud_.assign(nd, std::vector<double>(nh));
        vd_.assign(nd, std::vector<double>(nh));
        t_.assign(nd, std::vector<double>(nh));
        s_.assign(nd, std::vector<double>(nh));
        sd_.assign(nd, std::vector<double>(nh));
        for (std::size_t i = 0; i < nd; ++i) {
            for (std::size_t h = 0; h < nh; ++h) {
                double tau = stage_tau(h);
                NullPoint p = dets[i].trajectory.null_coords(tau);
                NullPoint r = dets[i].trajectory.null_rates(tau);
                u_[i][h] = p.u;
                v_[i][h] = p.v;
                ud_[i][h] = r.u;
                vd_[i][h] = r.v;
                t_[i][h] = p.t();
                s_[i][h] = dets[i].sw.value(tau);
                sd_[i][h] = dets[i].sw.rate(tau);
            }
        }
        gate_.assign(nd, std::vector<bool>(nd, false));
        for (std::size_t i = 0; i < nd; ++i)
            for (std::size_t j = 0; j < nd; ++j)
                gate_[i][j] = (i == j) ? dets[j].backreaction_enabled
                                       : causal_influence_active(dets[i], dets[j], grid.tau_end);
        om2_.resize(nd);
        cdiss_.resize(nd);
        for (std::size_t i = 0; i < nd; ++i) {
            om2_[i] = dets[i].omega * dets[i].omega;
            cdiss_[i] = local_damping_coefficient(dets[i]);
        }
    }

    double smoothing_eps() const { return eps_; }
    const std::vector<std::vector<bool>>& gates() const { return gate_; }

    SimulationResult::Realization run(const NoiseRealization& noise,
                                      const std::vector<std::pair<double, double>>& initial) const {
        const std::size_t nd = dets_.size();
        if (noise.eta.size() != nd) throw validation_error("integrate: noise has wrong detector count");
        if (!(noise.grid == grid_)) throw validation_error("integrate: noise grid does not match simulation grid");
        if (!initial.empty() && initial.size() != nd)
            throw validation_error("integrate: initial conditions have wrong detector count");

        RunState rs;
        rs.F.resize(nd);
        rs.Fh.resize(nd);
        for (std::size_t i = 0; i < nd; ++i) {
            rs.F[i] = forcing_series(noise.eta[i], dets_[i], grid_);
            rs.Fh[i] = half_step_values(rs.F[i]);
        }
        rs.Q.assign(nd, std::vector<double>(n_ + 1, 0.0));
        rs.Qd.assign(nd, std::vector<double>(n_ + 1, 0.0));
        rs.front.assign(nd, 0);
        for (std::size_t i = 0; i < nd; ++i) {
            rs.Q[i][0] = initial.empty() ? 0.0 : initial[i].first;
            rs.Qd[i][0] = initial.empty() ? 0.0 : initial[i].second;
        }

        std::vector<std::size_t> order(nd);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t m = 0; m < n_; ++m) {
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return t_[a][2 * m + 2] < t_[b][2 * m + 2]; });
            for (std::size_t i : order) {
                step_rk4(i, m, rs);
                rs.front[i] = m + 1;
                double q = rs.Q[i][m + 1];
                if (!std::isfinite(q) || std::abs(q) > 1e12)
                    throw instability_error("detector " + std::to_string(i) + " diverged at step " +
                                            std::to_string(m + 1) + " (tau = " + fmt_g15(grid_.node(m + 1)) + ")");
            }
        }

        SimulationResult::Realization out;
        out.substream = noise.substream;
        out.Q = std::move(rs.Q);
        out.Qd = std::move(rs.Qd);
        return out;
    }

  private:
    struct RunState {
        std::vector<std::vector<double>> F, Fh, Q, Qd;
        std::vector<std::size_t> front;
    };

    double stage_tau(std::size_t h) const { return grid_.tau_start + 0.5 * dt_ * static_cast<double>(h); }

    /// 4-point cubic midpoint interpolation of a node series.
    std::vector<double> half_step_values(const std::vector<double>& f) const {
        std::vector<double> h(n_);
        for (std::size_t m = 0; m < n_; ++m) {
            if (m == 0 || m + 2 > n_)
                h[m] = 0.5 * (f[m] + f[m + 1]);
            else
                h[m] = (-f[m - 1] + 9.0 * f[m] + 9.0 * f[m + 1] - f[m + 2]) / 16.0;
        }
        return h;
    }

    void step_rk4(std::size_t i, std::size_t m, RunState& rs) const {
        const double q0 = rs.Q[i][m], p0 = rs.Qd[i][m];
        const std::size_t h0 = 2 * m, hm = 2 * m + 1, h1 = 2 * m + 2;
        const double F0 = rs.F[i][m], Fm = rs.Fh[i][m], F1 = rs.F[i][m + 1];

        double k1q = p0;
        double k1p = acc(i, h0, q0, p0, F0, rs);
        double k2q = p0 + 0.5 * dt_ * k1p;
        double k2p = acc(i, hm, q0 + 0.5 * dt_ * k1q, k2q, Fm, rs);
        double k3q = p0 + 0.5 * dt_ * k2p;
        double k3p = acc(i, hm, q0 + 0.5 * dt_ * k2q, k3q, Fm, rs);
        double k4q = p0 + dt_ * k3p;
        double k4p = acc(i, h1, q0 + dt_ * k3q, k4q, F1, rs);

        rs.Q[i][m + 1] = q0 + dt_ * (k1q + 2.0 * k2q + 2.0 * k3q + k4q) / 6.0;
        rs.Qd[i][m + 1] = p0 + dt_ * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0;
    }

    double acc(std::size_t i, std::size_t h, double q, double p, double Fval, const RunState& rs) const {
        double a = Fval - om2_[i] * q;
        if (mode_ == IntegratorMode::Local) {
            if (gate_[i][i]) {
                double si = s_[i][h];
                a -= si * si * cdiss_[i] * p;
            }
            for (std::size_t j = 0; j < dets_.size(); ++j)
                if (j != i && gate_[i][j]) a += cross_local(i, j, h, rs);
        } else {
            for (std::size_t j = 0; j < dets_.size(); ++j)
                if (gate_[i][j]) a += 2.0 * memory_integral(i, j, h, p, rs);
        }
        return a;
    }

    /// Delta-function limit of the cross dissipation kernel: interpolated
    /// delayed Qdot pickup on each null ray, weighted by the null-rate ratio.
    double cross_local(std::size_t i, std::size_t j, std::size_t h, const RunState& rs) const {
        double si = s_[i][h];
        if (si == 0.0) return 0.0;
        const double t_now = t_[i][h];
        double contrib = 0.0;
        if (auto tu = dets_[j].trajectory.u_inverse(u_[i][h])) {
            double tj = dets_[j].trajectory.position(*tu).t;
            if (tj <= t_now * (1.0 + 1e-12) + 1e-12 && *tu >= grid_.tau_start) {
                double sj = dets_[j].sw.value(*tu);
                if (sj > 0.0) contrib += ud_[i][h] / dets_[j].trajectory.null_rates(*tu).u * sj * interp_qd(j, *tu, rs);
            }
        }
        if (auto tv = dets_[j].trajectory.v_inverse(v_[i][h])) {
            double tj = dets_[j].trajectory.position(*tv).t;
            if (tj <= t_now * (1.0 + 1e-12) + 1e-12 && *tv >= grid_.tau_start) {
                double sj = dets_[j].sw.value(*tv);
                if (sj > 0.0) contrib += vd_[i][h] / dets_[j].trajectory.null_rates(*tv).v * sj * interp_qd(j, *tv, rs);
            }
        }
        return -0.5 * dets_[i].e * dets_[j].e * si * contrib;
    }

    /// History integral of Eq. of motion with sgn smoothed as tanh(d/eps):
    ///   M_ij = int_lo^{tau_j(t_i(theta))} s_j [sdot_i mu_eps + s_i dmu_eps/dtheta] Qdot_j dtau'
    /// evaluated by the trapezoid rule over grid nodes plus a partial end
    /// interval. For j == i the end value of Qdot is the current RK stage
    /// value, which realizes the half-weight delta at the upper limit.
    double memory_integral(std::size_t i, std::size_t j, std::size_t h, double p_stage, const RunState& rs) const {
        const double theta = stage_tau(h);
        double tau_up;
        if (j == i) {
            tau_up = theta;
        } else {
            const double t_now = t_[i][h];
            const double tj_lo = t_[j][0], tj_hi = t_[j][2 * n_];
            if (t_now <= tj_lo) return 0.0;
            tau_up = (t_now >= tj_hi) ? grid_.tau_end : dets_[j].trajectory.time_inverse(t_now);
        }
        if (tau_up <= grid_.tau_start) return 0.0;
        tau_up = std::min(tau_up, grid_.tau_end);

        const double pref = dets_[i].e * dets_[j].e / 8.0;
        const double si = s_[i][h], sdi = sd_[i][h];
        if (si == 0.0 && sdi == 0.0) return 0.0;
        const double ui = u_[i][h], vi = v_[i][h], udi = ud_[i][h], vdi = vd_[i][h];
        const double inv_eps = 1.0 / eps_;

        auto integrand_at = [&](double uj, double vj, double sj, double qd) {
            if (sj == 0.0 || qd == 0.0) return 0.0;
            double th_u = std::tanh((ui - uj) * inv_eps);
            double th_v = std::tanh((vi - vj) * inv_eps);
            double mu_eps = -pref * (th_u + th_v);
            double dmu = -pref * inv_eps * (udi * (1.0 - th_u * th_u) + vdi * (1.0 - th_v * th_v));
            return sj * (sdi * mu_eps + si * dmu) * qd;
        };

        auto m_up = static_cast<std::size_t>((tau_up - grid_.tau_start) / dt_ + 1e-9);
        m_up = std::min({m_up, n_, rs.front[j]});

        double sum = 0.0;
        const auto& Qdj = rs.Qd[j];
        for (std::size_t k = 0; k <= m_up; ++k) {
            double g = integrand_at(u_[j][2 * k], v_[j][2 * k], s_[j][2 * k], Qdj[k]);
            sum += (k == 0 || k == m_up) ? 0.5 * g : g;
        }
        sum *= dt_;

        double rem = tau_up - grid_.node(m_up);
        if (rem > 1e-12 * dt_) {
            NullPoint pj = dets_[j].trajectory.null_coords(tau_up);
            double sj_end = dets_[j].sw.value(tau_up);
            double qd_end = (j == i) ? p_stage : interp_qd(j, tau_up, rs);
            double g_end = integrand_at(pj.u, pj.v, sj_end, qd_end);
            double g_last = integrand_at(u_[j][2 * m_up], v_[j][2 * m_up], s_[j][2 * m_up], Qdj[m_up]);
            sum += 0.5 * (g_last + g_end) * rem;
        }
        return sum;
    }

    /// Catmull-Rom interpolation of Qdot_j on the uniform grid; linear
    /// extrapolation past the history front (bounded to about one step by
    /// the round ordering).
    double interp_qd(std::size_t j, double tau, const RunState& rs) const {
        const auto& qd = rs.Qd[j];
        const std::size_t front = rs.front[j];
        double xi = (tau - grid_.tau_start) / dt_;
        if (xi <= 0.0) return qd[0];
        auto fr = static_cast<double>(front);
        if (xi >= fr) {
            if (front == 0) return qd[0];
            return qd[front] + (xi - fr) * (qd[front] - qd[front - 1]);
        }
        auto i1 = static_cast<std::size_t>(xi);
        if (i1 >= front) i1 = front - 1;
        double t = xi - static_cast<double>(i1);
        auto at = [&](std::size_t idx) { return qd[std::min(idx, front)]; };
        double p0 = (i1 == 0) ? qd[0] : at(i1 - 1);
        double p1 = at(i1), p2 = at(i1 + 1), p3 = at(i1 + 2);
        return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
                      (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
    }

    const std::vector<DetectorConfig>& dets_;
    Grid grid_;
    IntegratorMode mode_;
    std::size_t n_;
    double dt_;
    double eps_ = 0.0;

    std::vector<std::vector<double>> u_, v_, ud_, vd_, t_, s_, sd_;
    std::vector<std::vector<bool>> gate_;
    std::vector<double> om2_, cdiss_;
};

}  // namespace detail

/// Integrates one noise realization. Initial conditions default to
/// Q = Qdot = 0 at tau_start.
inline SimulationResult integrate(const std::vector<DetectorConfig>& detectors, const Grid& grid,
                                  const FieldConfig& field, const NoiseRealization& noise, IntegratorMode mode,
                                  const IntegrateOptions& opts = {}) {
    detail::LangevinIntegrator core(detectors, grid, field, mode);
    SimulationResult res;
    res.grid = grid;
    res.n_detectors = detectors.size();
    res.mode = mode;
    res.seed = noise.seed;
    res.n_realizations = 1;
    res.smoothing_eps = mode == IntegratorMode::Memory ? core.smoothing_eps() : 0.0;
    res.causal_gate = core.gates();
    for (std::size_t i = 0; i < detectors.size(); ++i)
        if (!detectors[i].backreaction_enabled)
            res.warnings.push_back("detector " + std::to_string(i) +
                                   ": back-reaction disabled; kernel hermiticity deliberately broken and radiation "
                                   "reaction dropped");
    res.kept.push_back(core.run(noise, opts.initial));
    res.substreams.push_back(noise.substream);
    res.mean_Q = res.kept[0].Q;
    res.mean_Qd = res.kept[0].Qd;
    res.var_Q.assign(detectors.size(), std::vector<double>(grid.size(), 0.0));
    res.var_Qd.assign(detectors.size(), std::vector<double>(grid.size(), 0.0));
    return res;
}

/// Monte-Carlo ensemble over independent noise substreams. Deterministic for
/// fixed (config, seed): realizations are aggregated in index order whatever
/// the worker count.
inline SimulationResult run_ensemble(const std::vector<DetectorConfig>& detectors, const Grid& grid,
                                     const FieldConfig& field, const NoiseSampler& sampler, std::uint64_t seed,
                                     std::size_t n_realizations, IntegratorMode mode,
                                     const IntegrateOptions& opts = {}, const RealizationSink& sink = {}) {
    if (n_realizations < 1) throw validation_error("run_ensemble: n_realizations must be >= 1");
    detail::LangevinIntegrator core(detectors, grid, field, mode);

    const std::size_t nd = detectors.size();
    const std::size_t nn = grid.size();
    SimulationResult res;
    res.grid = grid;
    res.n_detectors = nd;
    res.mode = mode;
    res.seed = seed;
    res.n_realizations = n_realizations;
    res.smoothing_eps = mode == IntegratorMode::Memory ? core.smoothing_eps() : 0.0;
    res.causal_gate = core.gates();
    for (std::size_t i = 0; i < nd; ++i)
        if (!detectors[i].backreaction_enabled)
            res.warnings.push_back("detector " + std::to_string(i) +
                                   ": back-reaction disabled; kernel hermiticity deliberately broken and radiation "
                                   "reaction dropped");
    res.mean_Q.assign(nd, std::vector<double>(nn, 0.0));
    res.var_Q.assign(nd, std::vector<double>(nn, 0.0));
    res.mean_Qd.assign(nd, std::vector<double>(nn, 0.0));
    res.var_Qd.assign(nd, std::vector<double>(nn, 0.0));
    res.substreams.resize(n_realizations);

    std::vector<std::vector<double>> m2_Q(nd, std::vector<double>(nn, 0.0));
    std::vector<std::vector<double>> m2_Qd(nd, std::vector<double>(nn, 0.0));

    const std::size_t batch = 32;
    std::vector<SimulationResult::Realization> slot(std::min(batch, n_realizations));
    std::size_t done = 0;
    std::size_t keep = std::min(opts.keep_realizations, n_realizations);
    while (done < n_realizations) {
        std::size_t count = std::min(batch, n_realizations - done);
        parallel_chunks(count, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t k = lo; k < hi; ++k) {
                NoiseRealization noise = sampler.sample(seed, done + k);
                slot[k] = core.run(noise, opts.initial);
            }
        });
        for (std::size_t k = 0; k < count; ++k) {
            std::size_t r = done + k;
            res.substreams[r] = slot[k].substream;
            if (sink) sink(r, slot[k]);
            double inv = 1.0 / static_cast<double>(r + 1);
            for (std::size_t i = 0; i < nd; ++i) {
                for (std::size_t mnode = 0; mnode < nn; ++mnode) {
                    double dq = slot[k].Q[i][mnode] - res.mean_Q[i][mnode];
                    res.mean_Q[i][mnode] += dq * inv;
                    m2_Q[i][mnode] += dq * (slot[k].Q[i][mnode] - res.mean_Q[i][mnode]);
                    double dp = slot[k].Qd[i][mnode] - res.mean_Qd[i][mnode];
                    res.mean_Qd[i][mnode] += dp * inv;
                    m2_Qd[i][mnode] += dp * (slot[k].Qd[i][mnode] - res.mean_Qd[i][mnode]);
                }
            }
            if (r < keep) res.kept.push_back(std::move(slot[k]));
        }
        done += count;
    }
    if (n_realizations > 1) {
        double invn = 1.0 / static_cast<double>(n_realizations - 1);
        for (std::size_t i = 0; i < nd; ++i)
            for (std::size_t mnode = 0; mnode < nn; ++mnode) {
                res.var_Q[i][mnode] = m2_Q[i][mnode] * invn;
                res.var_Qd[i][mnode] = m2_Qd[i][mnode] * invn;
            }
    }
    return res;
}

inline SimulationResult run_ensemble(const std::vector<DetectorConfig>& detectors, const Grid& grid,
                                     const FieldConfig& field, std::uint64_t seed, std::size_t n_realizations,
                                     IntegratorMode mode, const IntegrateOptions& opts = {}) {
    NoiseSampler sampler(build_covariance(detectors, grid, field));
    return run_ensemble(detectors, grid, field, sampler, seed, n_realizations, mode, opts);
}

}  // namespace wl
