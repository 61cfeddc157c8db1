#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "fluxon/profiles.hpp"
#include "fluxon/spectra.hpp"

using namespace fluxon;

namespace {
double rel(double got, double want) { return std::abs(got - want) / (1.0 + std::abs(want)); }
}  // namespace

TEST_CASE("spectral-plane maps") {
    CHECK(std::abs(E_of(cplx(-1.0)) - cplx(0.0, 0.5)) < 1e-15);
    CHECK(std::abs(D_of(cplx(-1.0))) < 1e-15);
    // E vanishes at w = 1 from either side of the cut
    CHECK(std::abs(E_of(cplx(1.0), +1)) < 1e-15);
    CHECK(std::abs(E_of(cplx(1.0), -1)) < 1e-15);
    CHECK(std::abs(D_of(cplx(1.0), +1) - cplx(-0.5, 0.0)) < 1e-15);
    CHECK(std::abs(Q_of(cplx(-1.0), 2.0, 5.0) - cplx(0.0, 1.0)) < 1e-15);

    CHECK_THROWS_AS(E_of(cplx(2.0, 0.0)), domain_error);
    CHECK_THROWS_AS(E_of(cplx(0.0, 0.0), +1), domain_error);
    CHECK_THROWS_AS(D_of(cplx(0.5, 0.0)), domain_error);

    // on the unit circle w = -e^{2i theta}: E = (i/2) cos(theta)
    for (double th : {0.3, 1.0, 1.4}) {
        const cplx w = -std::exp(cplx(0.0, 2.0 * th));
        CHECK(std::abs(E_of(w) - cplx(0.0, 0.5 * std::cos(th))) < 1e-14);
    }

    // derivative against central differences
    const cplx w0(-0.5, 0.3);
    const double h = 1e-6;
    const cplx fd = (E_of(w0 + h) - E_of(w0 - h)) / (2.0 * h);
    CHECK(std::abs(E_deriv(w0) - fd) < 1e-9);

    CHECK(rel(v_of_negative(-1.0), 2.0) < 1e-15);
    CHECK(rel(v_of_negative(-4.0), 2.5) < 1e-15);
    CHECK_THROWS_AS(v_of_negative(0.5), domain_error);
}

TEST_CASE("phase integral matches the sech closed form") {
    const auto p = ImpulseProfile::sech(0.75);
    for (double v : {0.1, 0.5, 1.0, 2.0, 2.9}) {
        CHECK(std::abs(wkb_phase(p, v) - pi * (0.75 - 0.25 * v)) < 1e-8);
    }
    CHECK(rel(wkb_phase_deriv(p, 1.3), -0.25 * pi) < 1e-6);
    CHECK_THROWS_AS(wkb_phase(p, 0.0), domain_error);
    CHECK_THROWS_AS(wkb_phase(p, 3.0), domain_error);
}

TEST_CASE("phase integral inversion recovers the profile coordinate") {
    const auto p = ImpulseProfile::sech(0.75);
    for (int i = 0; i < 20; ++i) {
        const double x0 = 0.1 + 2.4 * i / 19.0;
        CHECK(std::abs(abel_inverse(p, p(x0)) - x0) < 1e-6);
    }
    CHECK_THROWS_AS(abel_inverse(p, -3.0), domain_error);
    CHECK_THROWS_AS(abel_inverse(p, 0.0), domain_error);

    const auto q = ImpulseProfile::from_scr_g([](double) { return 1.5; }, -3.0);
    for (double x0 : {0.5, 1.5}) {
        CHECK(std::abs(abel_inverse(q, q(x0)) - x0) < 1e-6);
    }
}

TEST_CASE("quantization points match the sech spectrum") {
    const auto p = ImpulseProfile::sech(0.75);
    for (int N : {8, 16}) {
        const auto sd = bohr_sommerfeld(p, N);
        const double eps = 0.75 / N;
        CHECK(rel(sd.eps, eps) < 1e-14);
        REQUIRE(static_cast<int>(sd.v_k.size()) == N);
        REQUIRE(static_cast<int>(sd.poles.size()) == 2 * N);
        for (int k = 0; k < N; ++k) {
            CHECK(std::abs(sd.v_k[k] - 4.0 * (0.75 - (k + 0.5) * eps)) < 1e-10);
            if (k > 0) CHECK(sd.v_k[k] < sd.v_k[k - 1]);
        }
    }
    CHECK_THROWS_AS(bohr_sommerfeld(p, 0), domain_error);
    // A = 1, N = 3 puts v_1 exactly on the kink threshold
    CHECK_THROWS_AS(bohr_sommerfeld(ImpulseProfile::sech(1.0), 3), domain_error);
}

TEST_CASE("pole records satisfy the locus invariants") {
    const auto p = ImpulseProfile::sech(0.75);
    const double a = *p.a(), b = *p.b();
    for (int N : {8, 16}) {
        const auto sd = bohr_sommerfeld(p, N);
        int kinks = 0, breathers = 0;
        for (int k = 0; k < N; ++k) {
            const auto& p1 = sd.poles[2 * k];
            const auto& p2 = sd.poles[2 * k + 1];
            const double v = sd.v_k[k];
            CHECK(p1.k == k);
            CHECK(p1.sign == (k % 2 == 0 ? -1 : 1));
            CHECK(p2.sign == p1.sign);
            CHECK(std::abs(E_of(p1.w) - cplx(0.0, 0.25 * v)) < 1e-10);
            CHECK(std::abs(E_of(p2.w) - cplx(0.0, 0.25 * v)) < 1e-10);
            CHECK(std::abs(p1.w + 1.0) > 1e-6);
            if (v > 2.0) {
                kinks++;
                CHECK(p1.kind == PoleKind::Kink);
                CHECK(p1.w.imag() == 0.0);
                CHECK(std::abs(p1.w.real() * p2.w.real() - 1.0) < 1e-12);
                CHECK(p1.w.real() > a);
                CHECK(p1.w.real() < -1.0);
                CHECK(p2.w.real() > -1.0);
                CHECK(p2.w.real() < b);
            } else {
                breathers++;
                CHECK(p1.kind == PoleKind::Breather);
                CHECK(std::abs(std::abs(p1.w) - 1.0) < 1e-12);
                CHECK(std::abs(p2.w - std::conj(p1.w)) < 1e-15);
                CHECK(p1.w.imag() < 0.0);  // w = -e^{2i theta}, theta in (0, pi/2)
            }
        }
        CHECK(kinks == (N == 8 ? 3 : 5));
        CHECK(breathers == N - kinks);
    }
}

TEST_CASE("theta0 and its continuation") {
    const auto p = ImpulseProfile::sech(0.75);
    const double v25 = v_of_negative(-2.5);
    CHECK(std::abs(theta0(p, -2.5) - pi * (0.75 - 0.25 * v25)) < 1e-8);
    CHECK_THROWS_AS(theta0(p, -0.05), domain_error);  // v(w) above -G(0)

    const auto closed = [](cplx w) { return -(pi / 8.0) * (1.0 + w) / std::pow(-w, 1.5); };

    // sech: derivative of the quadrature phase against the closed form
    const double h = 1e-6;
    const double fd = (theta0(p, -1.5 + h) - theta0(p, -1.5 - h)) / (2.0 * h);
    CHECK(std::abs(fd - closed(cplx(-1.5)).real()) < 1e-6);
    CHECK(std::abs(theta0_deriv(p, cplx(-0.3, 0.4)) - closed(cplx(-0.3, 0.4))) < 1e-14);

    // shape-function profile equivalent to the sech: generic real-axis path and
    // the Taylor continuation both land on the same values
    const auto q = ImpulseProfile::from_scr_g([](double) { return 1.5; }, -3.0);
    CHECK(std::abs(theta0_deriv(q, cplx(-1.5, 0.0)) - closed(cplx(-1.5))) < 1e-6);
    CHECK(std::abs(theta0_deriv(q, cplx(-1.5, 0.2)) - closed(cplx(-1.5, 0.2))) < 1e-5);
}

TEST_CASE("transition point and the Delta configurations") {
    const auto p = ImpulseProfile::sech(0.75);
    const int N = 8;
    const double eps = 0.75 / N;
    auto sd = bohr_sommerfeld(p, N);

    const double tau_inf = -2.5;
    CHECK(std::floor(theta0(p, tau_inf) / (pi * eps)) == 2.0);
    const double tau = transition_point(p, tau_inf, N);
    CHECK(tau > *p.a());
    CHECK(tau < tau_inf);
    const double ratio = theta0(p, tau) / (pi * eps);
    CHECK(std::abs(ratio - 2.0) < 1e-9);

    apply_delta_config(sd, DeltaConfig::DeltaPrecK, tau);
    CHECK(sd.delta_config == DeltaConfig::DeltaPrecK);
    CHECK(delta_count(sd) == 2);
    for (const auto& pr : sd.poles) {
        if (pr.in_delta) {
            CHECK(pr.kind == PoleKind::Kink);
            CHECK(pr.w.real() <= tau);
        }
    }
    // parity of #Delta matches theta0(tau_N)/(pi eps)
    CHECK(delta_count(sd) % 2 == static_cast<int>(std::lround(ratio)) % 2);

    // mirrored configuration on the other side of -1
    const double tau2 = transition_point(p, -0.4, N);
    CHECK(std::abs(tau * tau2 - 1.0) < 1e-8);
    apply_delta_config(sd, DeltaConfig::DeltaKSucc, tau2);
    CHECK(delta_count(sd) == 2);
    for (const auto& pr : sd.poles) {
        if (pr.in_delta) {
            CHECK(pr.kind == PoleKind::Kink);
            CHECK(pr.w.real() >= tau2);
        }
    }

    apply_delta_config(sd, DeltaConfig::NablaPrecK, tau);
    CHECK(delta_count(sd) == 2 * N - 2);
    apply_delta_config(sd, DeltaConfig::NablaEmpty);
    CHECK(delta_count(sd) == 2 * N);
    CHECK(!sd.tau_N);
    apply_delta_config(sd, DeltaConfig::DeltaEmpty);
    CHECK(delta_count(sd) == 0);

    CHECK_THROWS_AS(apply_delta_config(sd, DeltaConfig::DeltaPrecK), domain_error);
    CHECK_THROWS_AS(transition_point(p, -1.0, N), domain_error);
    CHECK_THROWS_AS(transition_point(p, -8.0, N), domain_error);
    CHECK_THROWS_AS(transition_point(ImpulseProfile::sech(0.25), -2.0, N), domain_error);
}
