#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "worldline/detector.hpp"
#include "worldline/errors.hpp"
#include "worldline/grid.hpp"
#include "worldline/io.hpp"
#include "worldline/kernels.hpp"
#include "worldline/parallel.hpp"

namespace wl {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Independent substream id for realization r of a master seed.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t r) {
    return splitmix64(seed ^ (0x9E3779B97F4A7C15ull * (r + 1)));
}

}  // namespace detail

/// Stochastic-force covariance on the grid, stored as detector-blocks of the
/// lower triangle: C_ij[m,n] = nu_ij(tau_m, tau_n) / 2.
///
/// The factor 1/2 realizes the anticommutator statistics with commuting
/// Gaussian variables: <{eta_i, eta_j}> = nu_ij means <eta_i eta_j> = nu_ij/2.
/// Jitter of 1e-10 * (block max diagonal) is added to each diagonal block;
/// keeping the jitter block-local makes a leading detector's statistics
/// independent of detectors appended after it.
struct NoiseCovariance {
    std::size_t n_detectors = 0;
    Grid grid{};
    std::vector<Eigen::MatrixXd> blocks;  // row-major lower triangle: (i,j), j <= i

    const Eigen::MatrixXd& block(std::size_t i, std::size_t j) const { return blocks[i * (i + 1) / 2 + j]; }
    Eigen::MatrixXd& block(std::size_t i, std::size_t j) { return blocks[i * (i + 1) / 2 + j]; }

    std::size_t dim() const { return n_detectors * grid.size(); }

    Eigen::MatrixXd full_matrix() const {
        auto n = static_cast<Eigen::Index>(grid.size());
        Eigen::MatrixXd C(dim(), dim());
        for (std::size_t i = 0; i < n_detectors; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                C.block(static_cast<Eigen::Index>(i) * n, static_cast<Eigen::Index>(j) * n, n, n) = block(i, j);
                if (i != j)
                    C.block(static_cast<Eigen::Index>(j) * n, static_cast<Eigen::Index>(i) * n, n, n) =
                        block(i, j).transpose();
            }
        return C;
    }

    std::uint64_t fingerprint() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const auto& b : blocks) h = fnv1a64(b.data(), sizeof(double) * static_cast<std::size_t>(b.size()), h);
        return h;
    }
};

namespace detail {

/// True when nu_ij along this pair depends on tau - tau' only, with
/// bit-identical values across the diagonal (used for Toeplitz fill).
inline bool lag_stationary_pair(const Trajectory& a, const Trajectory& b) {
    if (a.kind() == TrajectoryKind::Static && b.kind() == TrajectoryKind::Static) return true;
    if (a.kind() == TrajectoryKind::Inertial && b.kind() == TrajectoryKind::Inertial && a.v0() == b.v0()) return true;
    if ((a.kind() == TrajectoryKind::Static && b.kind() == TrajectoryKind::Inertial && b.v0() == 0.0) ||
        (b.kind() == TrajectoryKind::Static && a.kind() == TrajectoryKind::Inertial && a.v0() == 0.0))
        return true;
    return false;
}

}  // namespace detail

inline NoiseCovariance build_covariance(const std::vector<DetectorConfig>& detectors, const Grid& grid,
                                        const FieldConfig& field) {
    field.validate();
    grid.validate_resolution(field.lambda_uv);
    for (const auto& d : detectors) {
        d.validate();
        if (d.trajectory.has_finite_domain() &&
            (grid.tau_start < d.trajectory.domain_lo() || grid.tau_end > d.trajectory.domain_hi()))
            throw validation_error("grid exceeds tabulated trajectory domain");
    }

    const std::size_t n = grid.size();
    auto ne = static_cast<Eigen::Index>(n);
    NoiseCovariance cov;
    cov.n_detectors = detectors.size();
    cov.grid = grid;
    cov.blocks.resize(detectors.size() * (detectors.size() + 1) / 2);

    auto taus = grid.nodes();
    for (std::size_t i = 0; i < detectors.size(); ++i) {
        std::vector<NullPoint> pi(n);
        for (std::size_t m = 0; m < n; ++m) pi[m] = detectors[i].trajectory.null_coords(taus[m]);
        for (std::size_t j = 0; j <= i; ++j) {
            std::vector<NullPoint> pj(n);
            for (std::size_t m = 0; m < n; ++m) pj[m] = detectors[j].trajectory.null_coords(taus[m]);
            Eigen::MatrixXd B(ne, ne);
            if (detail::lag_stationary_pair(detectors[i].trajectory, detectors[j].trajectory)) {
                // Toeplitz: one kernel evaluation per distinct lag.
                std::vector<double> row(n), col(n);
                for (std::size_t m = 0; m < n; ++m) {
                    row[m] = 0.5 * noise_kernel(detectors[i].e, detectors[j].e, pi[0], pj[m], field);
                    col[m] = 0.5 * noise_kernel(detectors[i].e, detectors[j].e, pi[m], pj[0], field);
                }
                for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t c = 0; c < n; ++c)
                        B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                            (r >= c) ? col[r - c] : row[c - r];
            } else {
                parallel_chunks(n, [&](std::size_t lo, std::size_t hi) {
                    for (std::size_t r = lo; r < hi; ++r) {
                        std::size_t c_end = (i == j) ? r + 1 : n;
                        for (std::size_t c = 0; c < c_end; ++c)
                            B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                                0.5 * noise_kernel(detectors[i].e, detectors[j].e, pi[r], pj[c], field);
                    }
                });
                if (i == j)
                    for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = r + 1; c < n; ++c)
                            B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                                B(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r));
            }
            if (i == j) {
                double jitter = 1e-10 * B.diagonal().maxCoeff();
                B.diagonal().array() += jitter;
            }
            cov.block(i, j) = std::move(B);
        }
    }
    return cov;
}

/// One realization of the correlated forces eta_i(tau) on the grid.
struct NoiseRealization {
    std::vector<std::vector<double>> eta;  // [detector][node]
    Grid grid{};
    std::uint64_t seed = 0;        // master seed
    std::uint64_t index = 0;       // realization number
    std::uint64_t substream = 0;   // derived stream id
    std::uint64_t covariance_fingerprint = 0;
};

/// Draws zero-mean Gaussian realizations with the given covariance via a
/// detector-blocked Cholesky factor. Block order follows detector order, so
/// detector i's output depends only on detectors 0..i; appending detectors
/// leaves earlier streams bit-identical.
class NoiseSampler {
  public:
    explicit NoiseSampler(NoiseCovariance cov) : cov_fp_(cov.fingerprint()), grid_(cov.grid), n_det_(cov.n_detectors) {
        const auto N = cov.n_detectors;
        L_.resize(N * (N + 1) / 2);
        diag_tri_.assign(N, true);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (!diag_tri_[j])
                    throw numerical_error("covariance: leading block " + std::to_string(j) +
                                          " is degenerate; cannot condition later detectors on it");
                Eigen::MatrixXd R = cov.block(i, j);
                for (std::size_t k = 0; k < j; ++k) R.noalias() -= Lb(i, k) * Lb(j, k).transpose();
                // L_ij = R * L_jj^{-T}
                Lb(j, j).triangularView<Eigen::Lower>().transpose().solveInPlace<Eigen::OnTheRight>(R);
                Lb(i, j) = std::move(R);
            }
            Eigen::MatrixXd S = std::move(cov.block(i, i));
            for (std::size_t k = 0; k < i; ++k) S.noalias() -= Lb(i, k) * Lb(i, k).transpose();
            Eigen::LLT<Eigen::MatrixXd> llt(S);
            if (llt.info() == Eigen::Success) {
                S = llt.matrixL();
            } else {
                factor_fallback(S, i);  // S replaced by a full square root
                diag_tri_[i] = false;
            }
            Lb(i, i) = std::move(S);
        }
    }

    std::size_t n_detectors() const { return n_det_; }
    const Grid& grid() const { return grid_; }
    std::uint64_t fingerprint() const { return cov_fp_; }

    /// Realization r of master seed `seed`; deterministic, independent of
    /// call order and thread count.
    NoiseRealization sample(std::uint64_t seed, std::uint64_t r) const {
        const std::size_t n = grid_.size();
        NoiseRealization out;
        out.grid = grid_;
        out.seed = seed;
        out.index = r;
        out.substream = detail::substream_seed(seed, r);
        out.covariance_fingerprint = cov_fp_;
        std::mt19937_64 rng(out.substream);
        std::normal_distribution<double> n01;
        std::vector<Eigen::VectorXd> z(n_det_);
        for (std::size_t i = 0; i < n_det_; ++i) {
            z[i].resize(static_cast<Eigen::Index>(n));
            for (std::size_t m = 0; m < n; ++m) z[i][static_cast<Eigen::Index>(m)] = n01(rng);
        }
        out.eta.resize(n_det_);
        for (std::size_t i = 0; i < n_det_; ++i) {
            Eigen::VectorXd acc = diag_tri_[i] ? Eigen::VectorXd(Lb(i, i).triangularView<Eigen::Lower>() * z[i])
                                               : Eigen::VectorXd(Lb(i, i) * z[i]);
            for (std::size_t k = 0; k < i; ++k) acc.noalias() += Lb(i, k) * z[k];
            out.eta[i].assign(acc.data(), acc.data() + acc.size());
        }
        return out;
    }

  private:
    Eigen::MatrixXd& Lb(std::size_t i, std::size_t j) { return L_[i * (i + 1) / 2 + j]; }
    const Eigen::MatrixXd& Lb(std::size_t i, std::size_t j) const { return L_[i * (i + 1) / 2 + j]; }

    /// Exceptional path: Schur block not positive definite under LLT. Accepts
    /// the block if its spectrum is non-negative within tolerance (clamping
    /// small negatives), otherwise reports the spectrum.
    void factor_fallback(Eigen::MatrixXd& S, std::size_t i) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        double max_diag = S.diagonal().maxCoeff();
        double min_ev = es.eigenvalues().minCoeff();
        if (min_ev < -1e-6 * max_diag)
            throw numerical_error("covariance block " + std::to_string(i) +
                                  " not PSD beyond jitter tolerance: min eigenvalue " + fmt_g15(min_ev) +
                                  ", max eigenvalue " + fmt_g15(es.eigenvalues().maxCoeff()) + ", max diagonal " +
                                  fmt_g15(max_diag));
        Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        // not triangular, but a valid square root; sampling uses it the same way
        S = es.eigenvectors() * d.asDiagonal();
    }

    std::vector<Eigen::MatrixXd> L_;
    std::vector<bool> diag_tri_;
    std::uint64_t cov_fp_;
    Grid grid_;
    std::size_t n_det_;
};

inline std::vector<NoiseRealization> sample_noise(const NoiseCovariance& cov, std::uint64_t seed,
                                                  std::size_t n_realizations) {
    if (n_realizations < 1) throw validation_error("sample_noise: n_realizations must be >= 1");
    NoiseSampler sampler(cov);
    std::vector<NoiseRealization> out(n_realizations);
    parallel_chunks(n_realizations, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t r = lo; r < hi; ++r) out[r] = sampler.sample(seed, r);
    });
    return out;
}

/// s_i(tau) * eta_i(tau) on the grid.
inline std::vector<double> switched_noise(const std::vector<double>& eta, const DetectorConfig& det,
                                          const Grid& grid) {
    std::vector<double> out(eta.size());
    for (std::size_t m = 0; m < eta.size(); ++m) out[m] = det.sw.value(grid.node(m)) * eta[m];
    return out;
}

}  // namespace wl
