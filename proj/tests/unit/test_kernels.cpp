#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

#include "worldline/analysis.hpp"
#include "worldline/kernels.hpp"
#include "worldline/trajectory.hpp"

using namespace wl;

namespace {

FieldConfig vac(double lam, double Lam) {
    FieldConfig f;
    f.lambda_ir = lam;
    f.lambda_uv = Lam;
    return f;
}

std::pair<NullPoint, NullPoint> random_pair(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    auto mk = [&](int kind) {
        switch (kind) {
            case 0: return Trajectory::make_static(2.0 * uni(rng));
            case 1: return Trajectory::inertial(0.85 * uni(rng), 2.0 * uni(rng));
            default: return Trajectory::uniformly_accelerated(0.4 + std::abs(uni(rng)), 2.0 * uni(rng));
        }
    };
    std::uniform_int_distribution<int> pick(0, 2);
    auto ti = mk(pick(rng)), tj = mk(pick(rng));
    std::uniform_real_distribution<double> tt(-2.5, 2.5);
    return {ti.null_coords(tt(rng)), tj.null_coords(tt(rng))};
}

}  // namespace

TEST_CASE("mu kernel closed form", "[kernels]") {
    // same static worldline, lag 0.5: du = dv = 0.5
    auto rest = Trajectory::make_static();
    NullPoint p1 = rest.null_coords(0.75), p2 = rest.null_coords(0.25);
    CHECK(mu_kernel(1.0, 1.0, p1, p2) == Catch::Approx(-0.25).margin(1e-15));
    // the defining sine integral converges to the same value
    double oracle = quadrature_oracle(1.0, 1.0, p1, p2, vac(1e-6, 1e6), KernelPart::Mu);
    CHECK(oracle == Catch::Approx(-0.25).margin(1e-6));

    // spacelike separation: commutator vanishes exactly
    auto left = Trajectory::make_static(0.0), right = Trajectory::make_static(2.0);
    CHECK(mu_kernel(1.0, 1.0, left.null_coords(1.0), right.null_coords(1.0)) == 0.0);

    // antisymmetry under swap (imaginary part of hermiticity)
    std::mt19937_64 rng(5);
    for (int k = 0; k < 100; ++k) {
        auto [pi, pj] = random_pair(rng);
        CHECK(mu_kernel(1.0, 0.7, pi, pj) == Catch::Approx(-mu_kernel(0.7, 1.0, pj, pi)).margin(1e-15));
    }
}

TEST_CASE("nu kernel closed form", "[kernels]") {
    auto f = vac(1e-3, 1e3);
    NullPoint p{0.0, 0.0};
    double coincidence = nu_kernel(1.0, 1.0, p, p, f);
    CHECK(coincidence == Catch::Approx(std::log(1e6) / (2.0 * M_PI)).epsilon(1e-12));
    CHECK(coincidence == Catch::Approx(2.1988).margin(1e-4));
    CHECK(quadrature_oracle(1.0, 1.0, p, p, f, KernelPart::Nu) == Catch::Approx(coincidence).margin(1e-8));

    // symmetry under swap (real part of hermiticity)
    std::mt19937_64 rng(6);
    for (int k = 0; k < 100; ++k) {
        auto [pi, pj] = random_pair(rng);
        CHECK(nu_kernel(1.0, 0.7, pi, pj, f) == Catch::Approx(nu_kernel(0.7, 1.0, pj, pi, f)).margin(1e-15));
    }

    // decay at large separation
    NullPoint q{1e4, 1e4};
    double far = nu_kernel(1.0, 1.0, q, p, f);
    CHECK(std::abs(far) < 0.01);
    CHECK(quadrature_oracle(1.0, 1.0, q, p, f, KernelPart::Nu) == Catch::Approx(far).margin(1e-6));

    FieldConfig bad;
    bad.lambda_ir = 2.0;
    bad.lambda_uv = 1.0;
    CHECK_THROWS_AS(nu_kernel(1.0, 1.0, p, q, bad), validation_error);
}

TEST_CASE("thermal nu kernel", "[kernels]") {
    // coth -> 1 limit: beta huge reproduces the vacuum
    auto f = vac(1e-3, 1e3);
    auto warm = f;
    warm.beta = 1e6;
    auto rest = Trajectory::make_static();
    NullPoint p1 = rest.null_coords(0.5), p2 = rest.null_coords(-0.5);
    CHECK(thermal_nu_kernel(1.0, 1.0, p1, p2, warm) == Catch::Approx(nu_kernel(1.0, 1.0, p1, p2, f)).margin(1e-4));

    // integrand domination: coth >= 1, so thermal >= vacuum at cutoff scales
    // far below the separation scale
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> uni(-6.0, 6.0);
    auto hot = f;
    hot.beta = 2.0;
    for (int k = 0; k < 100; ++k) {
        NullPoint a{uni(rng), uni(rng)}, b{uni(rng), uni(rng)};
        CHECK(thermal_nu_kernel(1.0, 1.0, a, b, hot) >= nu_kernel(1.0, 1.0, a, b, f) - 1e-12);
    }

    CHECK_THROWS_AS(thermal_nu_kernel(1.0, 1.0, p1, p2, f), validation_error);
    auto freezing = f;
    freezing.beta = -1.0;
    CHECK_THROWS_AS(thermal_nu_kernel(1.0, 1.0, p1, p2, freezing), validation_error);
}

TEST_CASE("thermal static kernel matches vacuum kernel on the hyperbola", "[kernels]") {
    // |du dv| = (4/a^2) sinh^2(a lag / 2) on the hyperbola makes the vacuum
    // kernel along accelerated motion thermal at T = a/(2 pi)
    const double a = 1.0;
    auto f = vac(1e-6, 1e3);
    auto th = f;
    th.beta = 2.0 * M_PI / a;
    auto hyp = Trajectory::uniformly_accelerated(a);
    auto rest = Trajectory::make_static();
    std::vector<double> d_acc, d_th;
    for (int k = 0; k <= 25; ++k) {
        double lag = 0.5 + 2.5 * k / 25.0;
        d_acc.push_back(nu_kernel(1.0, 1.0, hyp.null_coords(0.5 * lag), hyp.null_coords(-0.5 * lag), f));
        d_th.push_back(thermal_nu_kernel(1.0, 1.0, rest.null_coords(0.5 * lag), rest.null_coords(-0.5 * lag), th));
    }
    double ma = 0.0, mt = 0.0;
    for (std::size_t k = 0; k < d_acc.size(); ++k) {
        ma += d_acc[k] / d_acc.size();
        mt += d_th[k] / d_th.size();
    }
    for (std::size_t k = 0; k < d_acc.size(); ++k)
        CHECK((d_acc[k] - ma) - (d_th[k] - mt) == Catch::Approx(0.0).margin(1e-3));
}

TEST_CASE("advanced/retarded split", "[kernels]") {
    auto f = vac(1e-3, 1e3);
    std::mt19937_64 rng(13);

    // reconstruction: nu_r + nu_a = nu, mu_r + mu_a = mu
    for (int k = 0; k < 100; ++k) {
        auto [pi, pj] = random_pair(rng);
        ZParts z = z_split(1.0, 0.8, pi, pj, f);
        CHECK(z.nu_r + z.nu_a == Catch::Approx(nu_kernel(1.0, 0.8, pi, pj, f)).margin(1e-10));
        CHECK(z.mu_r + z.mu_a == Catch::Approx(mu_kernel(1.0, 0.8, pi, pj)).margin(1e-15));
    }

    // retarded parts depend on du only: vary dv at fixed du
    NullPoint pi{0.5, 0.3};
    ZParts ref = z_split(1.0, 1.0, pi, {0.0, 0.0}, f);
    for (int k = 1; k <= 10; ++k) {
        NullPoint pj{0.0, -0.2 * k};
        ZParts z = z_split(1.0, 1.0, pi, pj, f);
        CHECK(z.mu_r == Catch::Approx(ref.mu_r).margin(1e-12));
        CHECK(z.nu_r == Catch::Approx(ref.nu_r).margin(1e-12));
    }

    // single-sector value and its quadrature
    ZParts z = z_split(1.0, 1.0, {0.5, 0.0}, {0.0, 0.0}, f);
    CHECK(z.mu_r == Catch::Approx(-0.125).margin(1e-15));
    auto fw = vac(1e-6, 1e6);
    CHECK(quadrature_oracle(1.0, 1.0, {0.5, 0.0}, {0.0, 0.0}, fw, KernelPart::MuR) ==
          Catch::Approx(-0.125).margin(1e-6));
}

TEST_CASE("kernel grid assembly", "[kernels]") {
    auto f = vac(1e-3, 1e3);
    DetectorConfig det;
    det.trajectory = Trajectory::make_static();

    Grid g3{-0.5, 0.5, 2};
    KernelGrid kg = kernel_grid(det, det, g3, f);
    REQUIRE(kg.mu.rows() == 3);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            double expect = r == c ? 0.0 : (r > c ? -0.25 : 0.25);
            CHECK(kg.mu(r, c) == Catch::Approx(expect).margin(1e-15));
            CHECK(kg.nu(r, c) == Catch::Approx(kg.nu_r(r, c) + kg.nu_a(r, c)).margin(1e-12));
            CHECK(kg.mu(r, c) == Catch::Approx(kg.mu_r(r, c) + kg.mu_a(r, c)).margin(1e-15));
        }

    // noise-kernel grid is PSD up to jitter
    Grid g64{0.0, 6.3, 63};
    KernelGrid kg64 = kernel_grid(det, det, g64, f);
    Eigen::MatrixXd m = kg64.nu;
    m.diagonal().array() += 1e-10 * m.diagonal().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    CHECK(es.eigenvalues().minCoeff() > -1e-8);
}

TEST_CASE("quadrature oracle at null contact", "[kernels]") {
    auto f = vac(1e-3, 1e3);
    // du = 0 with dv != 0: the retarded sector takes the log branch
    NullPoint pi{0.7, 1.9}, pj{0.7, 0.2};
    double closed = z_split(1.0, 1.0, pi, pj, f).nu_r;
    CHECK(closed == Catch::Approx(std::log(1e6) / (4.0 * M_PI)).epsilon(1e-12));
    CHECK(quadrature_oracle(1.0, 1.0, pi, pj, f, KernelPart::NuR) == Catch::Approx(closed).margin(1e-6));
}

TEST_CASE("hermiticity and microcausality over random pairs", "[kernels]") {
    auto f = vac(1e-3, 1e3);
    std::mt19937_64 rng(21);
    for (int k = 0; k < 1000; ++k) {
        auto [pi, pj] = random_pair(rng);
        CHECK(std::abs(nu_kernel(1.1, 0.6, pi, pj, f) - nu_kernel(0.6, 1.1, pj, pi, f)) < 1e-10);
        CHECK(std::abs(mu_kernel(1.1, 0.6, pi, pj) + mu_kernel(0.6, 1.1, pj, pi)) < 1e-10);
    }
    // spacelike pairs: |dt| < |dx| implies mu = 0 exactly
    std::uniform_real_distribution<double> uni(-3.0, 3.0);
    for (int k = 0; k < 200; ++k) {
        double dt = uni(rng), dx = uni(rng);
        if (std::abs(dt) >= std::abs(dx)) continue;
        NullPoint pi{dt - dx, dt + dx}, pj{0.0, 0.0};
        CHECK(mu_kernel(1.0, 1.0, pi, pj) == 0.0);
    }
}

TEST_CASE("cutoff robustness", "[kernels]") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uni(0.5, 4.0);
    auto base = vac(1e-6, 1e6), wide = vac(1e-7, 1e7);
    for (int k = 0; k < 20; ++k) {
        NullPoint pi{uni(rng), uni(rng)}, pj{0.0, 0.0};
        double m1 = quadrature_oracle(1.0, 1.0, pi, pj, base, KernelPart::Mu);
        double m2 = quadrature_oracle(1.0, 1.0, pi, pj, wide, KernelPart::Mu);
        CHECK(std::abs(m1 - m2) < 1e-6);
    }
    // nu coincidence shifts by exactly (e^2/2pi) ln 10 per widened decade
    NullPoint p{0.0, 0.0};
    double n1 = nu_kernel(1.0, 1.0, p, p, vac(1e-3, 1e3));
    double n2 = nu_kernel(1.0, 1.0, p, p, vac(1e-4, 1e3));
    double n3 = nu_kernel(1.0, 1.0, p, p, vac(1e-4, 1e4));
    CHECK(n2 - n1 == Catch::Approx(std::log(10.0) / (2.0 * M_PI)).epsilon(1e-12));
    CHECK(n3 - n2 == Catch::Approx(std::log(10.0) / (2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("closed form vs oracle over random pairs", "[kernels]") {
    auto f = vac(1e-8, 1e8);
    std::mt19937_64 rng(41);
    int tested = 0;
    while (tested < 100) {
        auto [pi, pj] = random_pair(rng);
        if (std::abs(pi.u - pj.u) < 0.01 || std::abs(pi.v - pj.v) < 0.01) continue;
        ++tested;
        double nu_c = nu_kernel(0.9, 1.2, pi, pj, f);
        double mu_c = mu_kernel(0.9, 1.2, pi, pj);
        CHECK(quadrature_oracle(0.9, 1.2, pi, pj, f, KernelPart::Nu) == Catch::Approx(nu_c).margin(1e-6));
        CHECK(quadrature_oracle(0.9, 1.2, pi, pj, f, KernelPart::Mu) == Catch::Approx(mu_c).margin(1e-6));
    }
}

TEST_CASE("stationarity under lag-preserving shifts", "[kernels]") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> lagd(1.0, 3.0), shiftd(-1.0, 1.0);

    // inertial: exactly stationary
    auto boosted = Trajectory::inertial(0.5);
    auto f = vac(1e-3, 1e3);
    for (int k = 0; k < 100; ++k) {
        double lag = lagd(rng), sh = shiftd(rng);
        double v0 = nu_kernel(1.0, 1.0, boosted.null_coords(0.5 * lag), boosted.null_coords(-0.5 * lag), f);
        double v1 = nu_kernel(1.0, 1.0, boosted.null_coords(sh + 0.5 * lag), boosted.null_coords(sh - 0.5 * lag), f);
        CHECK(std::abs(v1 - v0) < 1e-9);
        double m0 = mu_kernel(1.0, 1.0, boosted.null_coords(0.5 * lag), boosted.null_coords(-0.5 * lag));
        double m1 = mu_kernel(1.0, 1.0, boosted.null_coords(sh + 0.5 * lag), boosted.null_coords(sh - 0.5 * lag));
        CHECK(m1 == Catch::Approx(m0).margin(1e-15));
    }

    // uniformly accelerated: stationary deep inside the cutoff windows
    auto hyp = Trajectory::uniformly_accelerated(1.0);
    auto fw = vac(1e-7, 1e10);
    for (int k = 0; k < 100; ++k) {
        double lag = lagd(rng), sh = shiftd(rng);
        double v0 = nu_kernel(1.0, 1.0, hyp.null_coords(0.5 * lag), hyp.null_coords(-0.5 * lag), fw);
        double v1 = nu_kernel(1.0, 1.0, hyp.null_coords(sh + 0.5 * lag), hyp.null_coords(sh - 0.5 * lag), fw);
        CHECK(std::abs(v1 - v0) < 1e-9);
    }
}
