#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "worldline/analysis.hpp"

using namespace wl;

namespace {

FieldConfig field_for(double lam, double Lam, double beta = std::numeric_limits<double>::infinity()) {
    FieldConfig f;
    f.lambda_ir = lam;
    f.lambda_uv = Lam;
    f.beta = beta;
    return f;
}

DetectorConfig det_on(double e, Trajectory tr) {
    DetectorConfig d;
    d.e = e;
    d.trajectory = std::move(tr);
    d.sw.tau_on = -1e9;
    return d;
}

}  // namespace

TEST_CASE("psd of a pure sinusoid peaks at its frequency", "[analysis]") {
    const double dt = 0.05;
    std::vector<double> series(2048);
    for (std::size_t m = 0; m < series.size(); ++m) series[m] = std::cos(2.0 * dt * static_cast<double>(m));
    auto spec = psd_estimate({series}, dt, 1.0);
    std::size_t peak = 0;
    for (std::size_t k = 1; k < spec.power.size(); ++k)
        if (spec.power[k] > spec.power[peak]) peak = k;
    CHECK(std::abs(spec.omega[peak] - 2.0) <= spec.bin_width);
}

TEST_CASE("psd integrates to the variance (Parseval)", "[analysis]") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n01;
    const double sigma = 2.0;
    std::vector<std::vector<double>> ens(64, std::vector<double>(1024));
    for (auto& s : ens)
        for (auto& x : s) x = sigma * n01(rng);
    auto spec = psd_estimate(ens, 0.1, 0.0);
    double integral = 0.0;
    for (double p : spec.power) integral += p * spec.bin_width;
    CHECK(integral == Catch::Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("psd error bars shrink with realizations", "[analysis]") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n01;
    auto make_ens = [&](std::size_t n) {
        std::vector<std::vector<double>> ens(n, std::vector<double>(512));
        for (auto& s : ens)
            for (auto& x : s) x = n01(rng);
        return ens;
    };
    auto small = psd_estimate(make_ens(64), 0.1, 0.0);
    auto large = psd_estimate(make_ens(256), 0.1, 0.0);
    double es = 0.0, el = 0.0;
    for (std::size_t k = 1; k < small.mc_error.size(); ++k) {
        es += small.mc_error[k];
        el += large.mc_error[k];
    }
    CHECK(el / es == Catch::Approx(0.5).epsilon(0.2));
}

TEST_CASE("psd validation", "[analysis]") {
    std::vector<std::vector<double>> ens(2, std::vector<double>(64, 1.0));
    // 64 nodes at dt = 0.1 is shorter than 4 periods of omega = 1
    CHECK_THROWS_AS(psd_estimate(ens, 0.1, 1.0), validation_error);
}

TEST_CASE("temperature fit recovers an injected thermal profile", "[analysis]") {
    LagProfile prof;
    const double T = 0.5;
    for (int k = 0; k < 50; ++k) {
        double lag = 1.0 + 5.0 * k / 49.0;
        prof.lags.push_back(lag);
        prof.values.push_back(-std::log(std::sinh(M_PI * T * lag)) / (2.0 * M_PI) + 7.7);
    }
    auto fit = fit_temperature(prof, 1.0, 1.0, field_for(1e-3, 1e3));
    CHECK(fit.T == Catch::Approx(0.5).margin(1e-3));
    CHECK(fit.residual < 1e-6);
}

TEST_CASE("accelerated worldline reads the Unruh temperature", "[analysis]") {
    // a = 2 pi gives T = 1; the spec window [0.5, 3]/T
    auto det = det_on(1.0, Trajectory::uniformly_accelerated(2.0 * M_PI));
    auto prof = kernel_lag_profile(det, field_for(1e-3, 1e3), 0.5, 3.0, 60);
    auto fit = fit_temperature(prof, 1.0, 1.0, field_for(1e-3, 1e3));
    CHECK(fit.T == Catch::Approx(1.0).epsilon(0.02));

    // cleaner cutoffs shrink the error well below a percent
    auto prof2 = kernel_lag_profile(det, field_for(1e-6, 50.0), 0.5, 3.0, 60);
    auto fit2 = fit_temperature(prof2, 1.0, 1.0, field_for(1e-6, 50.0));
    CHECK(fit2.T == Catch::Approx(1.0).epsilon(0.005));
}

TEST_CASE("static worldline fits to zero temperature", "[analysis]") {
    auto det = det_on(1.0, Trajectory::make_static());
    auto prof = kernel_lag_profile(det, field_for(1e-3, 1e3), 0.5, 3.0, 60);
    auto fit = fit_temperature(prof, 1.0, 1.0, field_for(1e-3, 1e3));
    CHECK(fit.T < 0.01);
}

TEST_CASE("temperature proportional to acceleration", "[analysis]") {
    auto f = field_for(1e-6, 50.0);
    std::vector<double> as = {M_PI, 2.0 * M_PI, 4.0 * M_PI}, Ts;
    for (double a : as) {
        double texp = a / (2.0 * M_PI);
        auto det = det_on(1.0, Trajectory::uniformly_accelerated(a));
        auto prof = kernel_lag_profile(det, f, 0.5 / texp, 3.0 / texp, 60);
        Ts.push_back(fit_temperature(prof, 1.0, 1.0, f).T);
    }
    // least-squares line through (a, T)
    double sa = 0, st = 0, saa = 0, sat = 0;
    for (std::size_t k = 0; k < as.size(); ++k) {
        sa += as[k];
        st += Ts[k];
        saa += as[k] * as[k];
        sat += as[k] * Ts[k];
    }
    double nn = static_cast<double>(as.size());
    double slope = (nn * sat - sa * st) / (nn * saa - sa * sa);
    double intercept = (st - slope * sa) / nn;
    CHECK(slope == Catch::Approx(1.0 / (2.0 * M_PI)).epsilon(0.03));
    CHECK(std::abs(intercept) < 0.02);
}

TEST_CASE("fluctuation-dissipation residual", "[analysis]") {
    Grid g{-20.0, 20.0, 4000};
    auto f = field_for(1e-3, 50.0);
    CHECK(fdr_residual(det_on(1.0, Trajectory::make_static()), g, f) < 0.02);
    CHECK(fdr_residual(det_on(1.0, Trajectory::inertial(0.5)), g, f) < 0.02);

    // zeroed mu: total violation, normalized residual 1
    auto det = det_on(1.0, Trajectory::make_static());
    std::size_t n = 2001;
    std::vector<double> nu(n), zero(n, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
        double lag = -10.0 + 0.01 * static_cast<double>(m);
        nu[m] = nu_kernel(1.0, 1.0, det.trajectory.null_coords(0.5 * lag), det.trajectory.null_coords(-0.5 * lag), f);
    }
    CHECK(fdr_residual_profiles(nu, zero, 10.0, f.lambda_ir, f.lambda_uv) == Catch::Approx(1.0).margin(1e-12));

    // residual invariant under e -> 2e (both kernels scale by e^2)
    double r1 = fdr_residual(det_on(1.0, Trajectory::make_static()), g, f);
    double r2 = fdr_residual(det_on(2.0, Trajectory::make_static()), g, f);
    CHECK(r1 == Catch::Approx(r2).margin(1e-12));

    // non-stationary input rejected
    CHECK_THROWS_AS(fdr_residual(det_on(1.0, Trajectory::uniformly_accelerated(1.0)), g, f), validation_error);
}

TEST_CASE("correlation-propagation one-sidedness", "[analysis]") {
    Grid g{0.0, 40.0, 2000};
    auto f = field_for(1e-3, 50.0);

    auto r = correlation_propagation_check(det_on(1.0, Trajectory::make_static(0.0)),
                                           det_on(1.0, Trajectory::make_static(1.0)), g, f);
    REQUIRE(r.negative_fraction.has_value());
    CHECK(*r.negative_fraction < 0.01);

    // conjugated kernel: support reflects to the negative side
    const double S = 20.0;
    std::size_t n = 2001;
    std::vector<std::complex<double>> Z(n);
    for (std::size_t m = 0; m < n; ++m) {
        double s = -S + 2.0 * S * static_cast<double>(m) / static_cast<double>(n - 1);
        double nu_r = detail::cos_sector(s, f) / (4.0 * M_PI);
        double mu_r = -detail::sgn0(s) / 8.0;
        Z[m] = std::conj(std::complex<double>(nu_r, mu_r));
    }
    CHECK(negative_power_fraction(Z, S) > 0.99);

    // Doppler-distorted lags: inertial pair with relative velocity 0.5
    auto moving = correlation_propagation_check(det_on(1.0, Trajectory::make_static(0.0)),
                                                det_on(1.0, Trajectory::inertial(0.5, 1.0)), g, f);
    REQUIRE(moving.negative_fraction.has_value());
    CHECK(*moving.negative_fraction < 0.02);

    // horizon pair: probe switched on beyond the accelerated detector's
    // future horizon has no common retarded support
    auto acc = det_on(1.0, Trajectory::uniformly_accelerated(1.0));
    auto probe = det_on(0.7, Trajectory::make_static(1.0));
    probe.sw.tau_on = 1.6;
    auto skip = correlation_propagation_check(acc, probe, g, f);
    CHECK_FALSE(skip.negative_fraction.has_value());
    CHECK(skip.skip_reason == "no common retarded support (causal vacuity)");
}

TEST_CASE("equilibrium statistics", "[analysis]") {
    auto f = field_for(1e-3, 25.0);
    Grid g{0.0, 30.0, 1500};
    auto det = det_on(1.0, Trajectory::make_static());
    det.omega = 1.0;
    det.sw = SwitchSpec{SwitchSpec::Type::Ramp, 0.0, 1.0};

    // zero-noise damped run: variance zero, mean decays to zero
    NoiseRealization quiet;
    quiet.grid = g;
    quiet.eta.assign(1, std::vector<double>(g.size(), 0.0));
    IntegrateOptions opts;
    opts.initial = {{1.0, 0.0}};
    auto res = integrate({det}, g, f, quiet, IntegratorMode::Local, opts);
    auto st = equilibrium_stats(res, det, 0);
    CHECK(st.var_Q == 0.0);
    CHECK(std::abs(st.mean_Q) < 1e-3);

    // window overlapping the transient is rejected
    CHECK_THROWS_AS(equilibrium_stats(res, det, 0, 5.0, 30.0), validation_error);
    CHECK_THROWS_AS(equilibrium_stats(res, det, 0, 25.0, 20.0), validation_error);
}

TEST_CASE("noise psd matches the covariance row transform", "[analysis]") {
    auto f = field_for(1e-3, 5.0);
    Grid g{0.0, 51.2, 512};
    DetectorConfig det = det_on(1.0, Trajectory::make_static());
    auto cov = build_covariance({det}, g, f);
    const std::size_t N = 400;
    auto reals = sample_noise(cov, 5150, N);
    std::vector<std::vector<double>> ens(N);
    for (std::size_t r = 0; r < N; ++r) ens[r] = reals[r].eta[0];
    auto spec = psd_estimate(ens, g.dt(), 0.0);

    // theory: one-sided density of the sampled stationary kernel,
    // nu_hat(omega)/2 * 2/(2 pi) = (e^2/4|omega|) / pi on the cutoff band
    int checked = 0;
    for (std::size_t k = 1; k + 1 < spec.power.size(); ++k) {
        double om = spec.omega[k];
        if (om < 0.5 || om > 2.5) continue;  // inside the band, away from edges
        double theory = 1.0 / (4.0 * std::abs(om)) * (2.0 / (2.0 * M_PI));
        CHECK(spec.power[k] == Catch::Approx(theory).margin(3.5 * spec.mc_error[k] + 0.05 * theory));
        ++checked;
    }
    CHECK(checked > 10);
}
