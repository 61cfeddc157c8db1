#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "common.hpp"
#include "elliptic.hpp"
#include "numerics.hpp"
#include "profiles.hpp"
#include "spectra.hpp"

namespace fluxon {

// Genus-1 continuation of the spectral band endpoints.  The moment condition
// M = 0 and the integral condition I = 0 determine the roots w0, w1 of
// R(w)^2 = (w - p)^2 - q as functions of (x, t), starting from a closed-form
// configuration at t = 0.  Librational states carry a conjugate pair of
// roots, rotational states two real roots inside [a, b].

enum class WaveKind { Librational, Rotational };

struct ModulationState {
    double x = 0.0, t = 0.0;
    WaveKind kind = WaveKind::Rotational;
    cplx w0, w1;  // conjugate pair (librational, Im w0 > 0) or reals w0 < w1 < 0
    double p = 0.0, q = 0.0;
    std::optional<double> w_plus;  // rotational: the simple zero of H near -1
    double n_p = 0.0, energy_E = 0.0, m = 0.0;
    double dPhi_dx = 0.0, dPhi_dt = 0.0, Phi = 0.0;
};

namespace detail {

// Orientation constants for the fixed contour parametrizations below.  They
// are pinned once against the t = 0 closed form and the signed near-origin
// Jacobian, then frozen; flipping any of them breaks those oracles.
inline constexpr double gap_arc_sign = -1.0;
inline constexpr double band_residue_sign = 1.0;
inline constexpr double band_path_sign = -1.0;
inline constexpr double root_offset_side = 1.0;

inline void warn_if_not_analytic(const ImpulseProfile& prof) {
    if (prof.analytic_continuation()) return;
    static bool warned = false;
    if (!warned) {
        warned = true;
        std::cerr << "modulation: profile phase lacks a closed-form analytic "
                     "continuation; off-axis integrands use a Taylor extension\n";
    }
}

// sqrt((w - w0)(w - w1)) with the branch cut on the straight segment joining
// the roots and R(w) ~ w at infinity; on a rotational band the +0 imaginary
// part of a real w selects the boundary value from above
inline cplx R_branch(cplx w, double p, double q) {
    const cplx d = w - p;
    return d * std::sqrt(1.0 - q / (d * d));
}

// R on the real axis for a conjugate root pair (no cut there); negative on
// (-infinity, 1) by the normalization at infinity
inline double R_gap_librational(double xi, double p, double q) {
    return -std::sqrt((xi - p) * (xi - p) - q);
}

// R evaluated from a precomputed displacement rel0 = w - w0; same branch as
// R_branch but immune to the (w - p)^2 - q cancellation when w approaches
// the root, since (w - p)^2 - q = rel0 * (w - w1) exactly
inline cplx R_from_rel(cplx w, cplx rel0, double p, double q) {
    const cplx w1 = q > 0.0 ? cplx(p + std::sqrt(q), 0.0) : cplx(p, -std::sqrt(-q));
    const cplx d = w - p;
    return d * std::sqrt(rel0 * (w - w1) / (d * d));
}

// fixed-level tanh-sinh rule on [lo, hi]; emits (x, weight, signed distance
// to the nearer endpoint, > 0 near lo) with the distance formed stably
template <class F>
void tanh_sinh_emit(double lo, double hi, int level, const F& emit) {
    const double h = 0.25 / double(1 << level);
    const double half = 0.5 * (hi - lo);
    const int n = int(3.75 / h);
    for (int k = -n; k <= n; ++k) {
        const double t = k * h;
        const double z = 0.5 * pi * std::sinh(t);
        const double ch = std::cosh(z);
        const double w = h * 0.5 * pi * std::cosh(t) / (ch * ch) * half;
        const double d = half * 2.0 / (std::exp(2.0 * std::abs(z)) + 1.0);
        emit(t < 0.0 ? lo + d : hi - d, w, t < 0.0 ? d : -d);
    }
}

// Quadrature table for integrals of theta0'(xi) sqrt(-xi) / R(xi) over the
// gap gamma, plain or against a Cauchy kernel.  Rotational gap: [a, w0] and
// [w1, b] with R < 0 on the left piece and R > 0 on the right one.  The
// librational gap self-intersects the real axis where the band loop touches
// down, so its two real pieces carry opposite orientations: [a, -1] forward,
// [-1, b] reversed, plus the conjugate-symmetric arc from w0 to -1 stored as
// its upper half and folded with the mirror orientation and gap_arc_sign.
// Moving the junction off -1 shifts line and arc contributions by equal and
// opposite amounts, so fixing it at -1 is a free choice.
struct GapTable {
    std::vector<cplx> line_x, line_g;
    std::vector<cplx> arc_x, arc_dx, arc_g;  // arc_dx: node minus the root w0
    cplx root;                               // the root the arc terminates at

    cplx moment() const {
        cplx line{}, arc{};
        for (const cplx& g : line_g) line += g;
        for (const cplx& g : arc_g) arc += g;
        return line + gap_arc_sign * (arc + std::conj(arc));
    }

    cplx cauchy(cplx w) const {
        cplx line{}, up{}, down{};
        for (std::size_t i = 0; i < line_x.size(); ++i) line += line_g[i] / (line_x[i] - w);
        const cplx wc = std::conj(w);
        for (std::size_t i = 0; i < arc_x.size(); ++i) {
            up += arc_g[i] / (arc_x[i] - w);
            down += arc_g[i] / (arc_x[i] - wc);
        }
        return line + gap_arc_sign * (up + std::conj(down));
    }

    // Cauchy sum at w = root + rel0, with the crowded arc-node differences
    // formed from displacements so that the sum stays accurate when both the
    // node and the evaluation point sit within rounding distance of the root;
    // w itself is passed separately since it is the accurate quantity away
    // from the root
    cplx cauchy_rel(cplx w, cplx rel0) const {
        cplx line{}, up{}, down{};
        for (std::size_t i = 0; i < line_x.size(); ++i) line += line_g[i] / (line_x[i] - w);
        const cplx wc = std::conj(w);
        for (std::size_t i = 0; i < arc_x.size(); ++i) {
            up += arc_g[i] / (arc_dx[i] - rel0);
            down += arc_g[i] / (arc_x[i] - wc);
        }
        return line + gap_arc_sign * (up + std::conj(down));
    }
};

inline GapTable build_gap_table(const ImpulseProfile& prof, double p, double q,
                                int level = 6) {
    if (!prof.a() || !prof.b())
        throw domain_error("modulation: profile has no rotational spectral interval");
    warn_if_not_analytic(prof);
    const double a = *prof.a(), b = *prof.b();
    GapTable T;
    const auto num = [&](cplx xi) { return theta0_deriv(prof, xi) * std::sqrt(-xi); };

    if (q > 0.0) {
        const double w0 = p - std::sqrt(q), w1 = p + std::sqrt(q);
        if (w0 < a - 1e-12 || w1 > b + 1e-12)
            throw domain_error("modulation: rotational roots left [a, b]");
        T.root = cplx(w0, 0.0);
        tanh_sinh_emit(a, w0, level, [&](double xi, double w, double sd) {
            const double up = sd < 0.0 ? -sd : w0 - xi;
            T.line_x.push_back(cplx(xi, 0.0));
            T.line_g.push_back(w * num(cplx(xi, 0.0)) / -std::sqrt(up * (w1 - xi)));
        });
        tanh_sinh_emit(w1, b, level, [&](double xi, double w, double sd) {
            const double dn = sd > 0.0 ? sd : xi - w1;
            T.line_x.push_back(cplx(xi, 0.0));
            T.line_g.push_back(w * num(cplx(xi, 0.0)) / std::sqrt(dn * (xi - w0)));
        });
        return T;
    }

    for (const double flip : {1.0, -1.0}) {
        tanh_sinh_emit(flip > 0.0 ? a : -1.0, flip > 0.0 ? -1.0 : b, level,
                       [&](double xi, double w, double) {
                           T.line_x.push_back(cplx(xi, 0.0));
                           T.line_g.push_back(flip * w * num(cplx(xi, 0.0)) /
                                              R_gap_librational(xi, p, q));
                       });
    }
    const cplx w0{p, std::sqrt(-q)};
    const double psi0 = std::arg(w0), r0 = std::abs(w0);
    const double slope = (1.0 - r0) / (pi - psi0);
    const cplx e0 = std::exp(cplx(0.0, psi0));
    T.root = w0;
    tanh_sinh_emit(psi0, pi, level, [&](double psi, double w, double sd) {
        const double dpsi = sd > 0.0 ? sd : psi - psi0;
        const double rho = r0 + slope * dpsi;
        const cplx e = std::exp(cplx(0.0, psi));
        const cplx zeta = rho * e;
        const cplx dzeta = (slope + cplx(0.0, rho)) * e;
        // zeta - w0 without cancellation, from the path parametrization
        const cplx em1{-2.0 * std::sin(0.5 * dpsi) * std::sin(0.5 * dpsi), std::sin(dpsi)};
        const cplx rel = e0 * (r0 * em1 + slope * dpsi * (em1 + 1.0));
        const cplx g = w * num(zeta) * dzeta / R_from_rel(zeta, rel, p, q);
        if (!std::isfinite(std::abs(g))) return;
        T.arc_x.push_back(zeta);
        T.arc_dx.push_back(rel);
        T.arc_g.push_back(g);
    });
    return T;
}

// gap form of H against a prebuilt table
inline cplx h_core(const GapTable& T, cplx w, double root_Pi, double x, double t,
                   int sigma) {
    return -(1.0 / (4.0 * root_minus(w, 0))) *
           ((x - t) / (w * root_Pi) - double(sigma) * (4.0 / pi) * T.cauchy(w));
}

// same, for w = T.root + rel0 with the Cauchy sum recentred at the root
inline cplx h_core_rel(const GapTable& T, cplx w, cplx rel0, double root_Pi, double x,
                       double t, int sigma) {
    return -(1.0 / (4.0 * root_minus(w, 0))) *
           ((x - t) / (w * root_Pi) - double(sigma) * (4.0 / pi) * T.cauchy_rel(w, rel0));
}

// band-side correction turning the gap form into the boundary value on beta
inline cplx band_term(const ImpulseProfile& prof, cplx w, double p, double q, int sigma) {
    return double(sigma) * band_residue_sign * theta0_deriv(prof, w) /
           (cplx(0.0, 1.0) * R_branch(w, p, q));
}

// shared parametrization of the upper half band path: librational runs from
// 1 to the upper root along a radius-interpolated near-circle, rotational
// along the upper unit arc from 1 to -1 (the trailing real segment to w_plus
// has a purely imaginary integrand and drops under the real part).  f is
// called as f(zeta, rel0) with rel0 = zeta - w0 formed from the path
// parametrization, exact near the root
template <class F>
cplx band_path_integral(const F& f, double p, double q, double tol = 1e-10) {
    if (q < 0.0) {
        const cplx w0{p, std::sqrt(-q)};
        const double psi0 = std::arg(w0), r0 = std::abs(w0);
        const cplx e0 = std::exp(cplx(0.0, psi0));
        return tanh_sinh(
            [&](double s_in, double) {
                // hold the last 1e-9 of the parameter off the root so the
                // Cauchy sums never see a denominator at rounding distance
                const double s = std::min(s_in, 1.0 - 1e-9);
                const double u = 1.0 - s;
                const cplx e = std::exp(cplx(0.0, s * psi0));
                const double rho = 1.0 + s * (r0 - 1.0);
                const cplx em1{-2.0 * std::sin(0.5 * u * psi0) * std::sin(0.5 * u * psi0),
                               -std::sin(u * psi0)};
                const cplx rel = e0 * (r0 * em1 + u * (1.0 - r0) * (em1 + 1.0));
                return f(rho * e, rel) * (r0 - 1.0 + cplx(0.0, psi0 * rho)) * e;
            },
            0.0, 1.0, tol);
    }
    const double w0 = p - std::sqrt(q);
    return tanh_sinh(
        [&](double psi, double) {
            const cplx zeta = std::exp(cplx(0.0, psi));
            return f(zeta, zeta - w0) * cplx(0.0, 1.0) * zeta;
        },
        0.0, pi, tol);
}

inline void check_sigma(int sigma, const char* who) {
    if (sigma != 1 && sigma != -1)
        throw domain_error(std::string(who) + ": sigma must be +1 or -1");
}

inline void set_roots(ModulationState& st) {
    if (st.q > 0.0) {
        st.w0 = st.p - std::sqrt(st.q);
        st.w1 = st.p + std::sqrt(st.q);
        st.kind = WaveKind::Rotational;
    } else {
        st.w0 = cplx(st.p, std::sqrt(-st.q));
        st.w1 = std::conj(st.w0);
        st.kind = WaveKind::Librational;
    }
}

}  // namespace detail

// M = (x - t)/sqrt(p^2 - q) + x + t + sigma (4/pi) * gap integral; sigma = +1
// when the gap carries the Delta-empty orientation (x >= 0), -1 for the
// nabla-empty one
inline double moment_M(const ImpulseProfile& prof, double p, double q, double x, double t,
                       int sigma) {
    detail::check_sigma(sigma, "moment_M");
    const auto T = detail::build_gap_table(prof, p, q);
    return (x - t) / std::sqrt(p * p - q) + x + t + sigma * (4.0 / pi) * T.moment().real();
}

// H via the gap form; the band-side flag adds the theta0'/(i R) correction
// that turns the gap form into the boundary value taken on the band
inline cplx h_function(const ImpulseProfile& prof, cplx w, double p, double q, double x,
                       double t, int sigma, bool band_side) {
    detail::check_sigma(sigma, "h_function");
    const auto T = detail::build_gap_table(prof, p, q);
    cplx h = detail::h_core(T, w, std::sqrt(p * p - q), x, t, sigma);
    if (band_side) h += detail::band_term(prof, w, p, q, sigma);
    return h;
}

// I = Re of the band-side R*H integrated over the upper half band path; the
// pairing of path orientation and R boundary value makes the value itself
// independent of the Delta choice
inline double integral_I(const ImpulseProfile& prof, double p, double q, double x, double t,
                         int sigma) {
    detail::check_sigma(sigma, "integral_I");
    const auto T = detail::build_gap_table(prof, p, q);
    const double root_Pi = std::sqrt(p * p - q);
    const cplx total = detail::band_path_integral(
        [&](cplx zeta, cplx rel0) {
            // R * band term with the R factors cancelled analytically
            return detail::R_from_rel(zeta, rel0, p, q) *
                       detail::h_core_rel(T, zeta, rel0, root_Pi, x, t, sigma) +
                   double(sigma) * detail::band_residue_sign * theta0_deriv(prof, zeta) /
                       cplx(0.0, 1.0);
        },
        p, q);
    return detail::band_path_sign * total.real();
}

// explicit t- and x-derivatives of M and I at fixed roots
inline double moment_dt(double p, double q) {
    const double root_Pi = std::sqrt(p * p - q);
    return (root_Pi - 1.0) / root_Pi;
}

inline double moment_dx(double p, double q) {
    const double root_Pi = std::sqrt(p * p - q);
    return (root_Pi + 1.0) / root_Pi;
}

inline double integral_dt(double p, double q) {
    const cplx total = detail::band_path_integral(
        [&](cplx zeta, cplx rel0) {
            return detail::R_from_rel(zeta, rel0, p, q) /
                   (zeta * detail::root_minus(zeta, 0));
        },
        p, q);
    return detail::band_path_sign * total.real() / (4.0 * std::sqrt(p * p - q));
}

inline double integral_dx(double p, double q) { return -integral_dt(p, q); }

// limiting value of H at a band root (k = 0 the left or upper root, k = 1
// the other), Richardson-extrapolated from band-side offsets
inline cplx h_at_root(const ImpulseProfile& prof, int k, double p, double q, double x,
                      double t, int sigma) {
    detail::check_sigma(sigma, "h_at_root");
    const auto T = detail::build_gap_table(prof, p, q);
    const double root_Pi = std::sqrt(p * p - q);
    const auto side_value = [&](cplx w) {
        return detail::h_core(T, w, root_Pi, x, t, sigma) +
               detail::band_term(prof, w, p, q, sigma);
    };
    // H continues analytically through either root from the band side; the
    // radius of that continuation is set by the nearest other feature (the
    // opposite root or an interval endpoint), so the offsets scale with it
    // and a quadratic Richardson pass removes the leading offset error
    const auto extrapolate = [](const auto& v, double r) {
        return (8.0 * v(0.25 * r) - 6.0 * v(0.5 * r) + v(r)) / 3.0;
    };
    if (q > 0.0) {
        const double w0 = p - std::sqrt(q), w1 = p + std::sqrt(q);
        const double wk = k == 0 ? w0 : w1;
        const double edge = (k == 0 && prof.a()) ? w0 - *prof.a()
                          : (k == 1 && prof.b()) ? *prof.b() - w1
                                                 : w1 - w0;
        const double r = 1e-3 * std::min(w1 - w0, edge > 0.0 ? edge : w1 - w0);
        const auto above = [&](double rr) { return side_value(cplx(wk, rr)).real(); };
        return cplx(extrapolate(above, r), 0.0);
    }
    const cplx w0{p, std::sqrt(-q)};
    const cplx dir = detail::root_offset_side * w0 / std::abs(w0);
    const double r = 2e-3 * w0.imag();
    const auto off = [&](double rr) { return side_value(w0 + dir * rr); };
    const cplx h0 = extrapolate(off, r);
    return k == 0 ? h0 : std::conj(h0);
}

// closed-form Jacobian det d(M, I)/d(p, q); the imaginary parts of the
// root-chart factors cancel
inline double jacobian_pq(const ImpulseProfile& prof, double p, double q, double x,
                          double t, int sigma) {
    const cplx w0 = q > 0.0 ? cplx(p - std::sqrt(q), 0.0) : cplx(p, std::sqrt(-q));
    const cplx w1 = q > 0.0 ? cplx(p + std::sqrt(q), 0.0) : std::conj(w0);
    const double root_Pi = std::sqrt(p * p - q);
    double D;
    if (q < 0.0) {
        D = complete_K(0.5 * (1.0 - p / root_Pi)) / std::sqrt(root_Pi);
    } else {
        const double denom = std::sqrt(-w0.real()) + std::sqrt(-w1.real());
        D = 2.0 * complete_K(4.0 * root_Pi / (denom * denom)) / denom;
    }
    const cplx H0 = h_at_root(prof, 0, p, q, x, t, sigma);
    const cplx H1 = h_at_root(prof, 1, p, q, x, t, sigma);
    const cplx Jw =
        -D * detail::root_minus(w0, 0) * detail::root_minus(w1, 0) * H0 * H1 * (w1 - w0);
    const cplx chart =
        q > 0.0 ? cplx(1.0 / std::sqrt(q), 0.0) : cplx(0.0, 1.0 / std::sqrt(-q));
    return (Jw * chart).real();
}

// simple zero of the band-side H on (w0, w1), at -1 when t = 0
inline double find_w_plus(const ImpulseProfile& prof, double p, double q, double x,
                          double t, int sigma) {
    detail::check_sigma(sigma, "find_w_plus");
    if (!(q > 0.0)) throw domain_error("find_w_plus: needs a rotational state");
    const auto T = detail::build_gap_table(prof, p, q);
    const double root_Pi = std::sqrt(p * p - q);
    const double w0 = p - std::sqrt(q), w1 = p + std::sqrt(q);
    const double margin = 1e-3 * (w1 - w0);
    const auto hb = [&](double xi) {
        const cplx w(xi, 0.0);
        return (detail::h_core(T, w, root_Pi, x, t, sigma) +
                detail::band_term(prof, w, p, q, sigma))
            .real();
    };
    for (double half = 0.02 * (w1 - w0); half <= 0.6 * (w1 - w0); half *= 2.0) {
        const double lo = std::max(w0 + margin, -1.0 - half);
        const double hi = std::min(w1 - margin, -1.0 + half);
        if (!(lo < hi)) break;
        if (hb(lo) * hb(hi) <= 0.0) return brent(hb, lo, hi, 1e-12);
    }
    throw numeric_error("find_w_plus: no sign change of H inside the band");
}

inline void refresh_derived(ModulationState& st) {
    const double root_Pi = std::sqrt(st.p * st.p - st.q);
    st.n_p = (1.0 - root_Pi) / (1.0 + root_Pi);
    st.energy_E = -st.p / root_Pi;
    double D;
    if (st.kind == WaveKind::Librational) {
        st.m = 0.5 * (1.0 + st.energy_E);
        if (!(st.m > 0.0 && st.m < 1.0))
            throw domain_error("modulation state: librational parameter left (0, 1)");
        D = complete_K(st.m) / std::sqrt(root_Pi);
    } else {
        st.m = 2.0 / (1.0 + st.energy_E);
        if (!(st.m > 0.0 && st.m < 1.0))
            throw domain_error("modulation state: rotational parameter left (0, 1)");
        D = 2.0 * complete_K(st.m) / (std::sqrt(-st.w0.real()) + std::sqrt(-st.w1.real()));
    }
    st.dPhi_dx = pi / (4.0 * D) * (1.0 - 1.0 / root_Pi);
    st.dPhi_dt = pi / (4.0 * D) * (1.0 + 1.0 / root_Pi);
}

inline ModulationState derived_fields(ModulationState st) {
    refresh_derived(st);
    return st;
}

// quarter-period normalizer of the phase gradient
inline double phase_normalizer(const ModulationState& st) {
    const double root_Pi = std::sqrt(st.p * st.p - st.q);
    if (st.kind == WaveKind::Librational) return complete_K(st.m) / std::sqrt(root_Pi);
    return 2.0 * complete_K(st.m) / (std::sqrt(-st.w0.real()) + std::sqrt(-st.w1.real()));
}

inline ModulationState initial_state(const ImpulseProfile& prof, double x) {
    detail::warn_if_not_analytic(prof);
    if (prof.x_crit() && std::abs(std::abs(x) - *prof.x_crit()) < 1e-3)
        throw domain_error("initial_state: x within the separatrix exclusion margin");
    const double g = prof(std::abs(x));
    const double p = 1.0 - 0.5 * g * g;
    ModulationState st;
    st.x = x;
    st.t = 0.0;
    st.p = p;
    st.q = p * p - 1.0;
    detail::set_roots(st);
    if (st.kind == WaveKind::Rotational) st.w_plus = -1.0;
    st.Phi = 0.0;
    refresh_derived(st);
    return st;
}

// damped Newton continuation of M = I = 0 along t at fixed x, with local
// step halving and a one-off cross-check of the finite-difference Jacobian
// against the closed form
inline ModulationState newton_continue(const ImpulseProfile& prof, ModulationState st,
                                       double target_t, int steps) {
    if (steps < 1) throw domain_error("newton_continue: need at least one step");
    const int sigma = st.x >= 0.0 ? +1 : -1;
    const WaveKind kind0 = st.kind;
    const double t_begin = st.t;
    bool crosschecked = false;
    int i = 0;
    int halvings = 0;
    while (i < steps) {
        const double t_goal = t_begin + (target_t - t_begin) * (i + 1) / steps;
        const double t_try = st.t + (t_goal - st.t) / (1 << halvings);
        const auto res = newton2(
            [&](double pp, double qq) {
                return std::pair{moment_M(prof, pp, qq, st.x, t_try, sigma),
                                 integral_I(prof, pp, qq, st.x, t_try, sigma)};
            },
            st.p, st.q, 1e-10, 30);
        if (!res.converged) {
            if (++halvings > 4)
                throw numeric_error("newton_continue: stagnation at t = " +
                                    std::to_string(t_try) + ", last good t = " +
                                    std::to_string(st.t));
            continue;
        }
        if ((st.q > 0.0) != (res.x1 > 0.0))
            throw numeric_error("newton_continue: root configuration changed type");
        const double phi_t_prev = st.dPhi_dt;
        const double t_prev = st.t;
        st.p = res.x0;
        st.q = res.x1;
        detail::set_roots(st);
        if (st.kind != kind0)
            throw numeric_error("newton_continue: root configuration changed type");
        refresh_derived(st);
        st.t = t_try;
        st.Phi += 0.5 * (phi_t_prev + st.dPhi_dt) * (t_try - t_prev);
        if (st.kind == WaveKind::Rotational)
            st.w_plus = find_w_plus(prof, st.p, st.q, st.x, st.t, sigma);
        else
            st.w_plus.reset();
        if (!crosschecked) {
            crosschecked = true;
            const double hp = 1e-5 * std::max(1.0, std::abs(st.p));
            const double hq = 1e-5 * std::max(1.0, std::abs(st.q));
            const auto MI = [&](double pp, double qq) {
                return std::pair{moment_M(prof, pp, qq, st.x, st.t, sigma),
                                 integral_I(prof, pp, qq, st.x, st.t, sigma)};
            };
            const auto [mp1, ip1] = MI(st.p + hp, st.q);
            const auto [mm1, im1] = MI(st.p - hp, st.q);
            const auto [mp2, ip2] = MI(st.p, st.q + hq);
            const auto [mm2, im2] = MI(st.p, st.q - hq);
            const double fd = (mp1 - mm1) / (2 * hp) * (ip2 - im2) / (2 * hq) -
                              (mp2 - mm2) / (2 * hq) * (ip1 - im1) / (2 * hp);
            const double closed = jacobian_pq(prof, st.p, st.q, st.x, st.t, sigma);
            if (std::abs(fd - closed) > 1e-3 * std::abs(closed))
                throw numeric_error("newton_continue: Jacobian cross-check failed");
        }
        if (st.t >= t_goal - 1e-15 * std::max(1.0, std::abs(t_goal))) {
            ++i;
            halvings = 0;
        }
    }
    return st;
}

namespace detail {

// fixed composite Gauss-Legendre nodes on [0, 1]
struct UnitRule {
    std::vector<double> x, w;
};

inline const UnitRule& unit_rule(int panels) {
    static std::map<int, UnitRule> cache;
    auto it = cache.find(panels);
    if (it != cache.end()) return it->second;
    using G = boost::math::quadrature::gauss<double, 30>;
    UnitRule r;
    const double h = 1.0 / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h, half = 0.5 * h;
        for (std::size_t i = 0; i < G::abscissa().size(); ++i) {
            const double ab = G::abscissa()[i], wt = G::weights()[i] * half;
            r.x.push_back(mid - half * ab);
            r.w.push_back(wt);
            if (ab != 0.0) {
                r.x.push_back(mid + half * ab);
                r.w.push_back(wt);
            }
        }
    }
    return cache.emplace(panels, std::move(r)).first->second;
}

// quadrature table for the square-root chart: the rotational gap pieces
// [a, a + kp^2] and [b - ks^2, b] written in the inner variable s = 1 - u^2
// that absorbs the vanishing factor of R at the movable root, leaving the
// size |k| of each piece as an explicit prefactor in the chart equations.
// Nodes depend only on k^2, so one table serves every Cauchy pole
struct HatTable {
    std::vector<double> xi[2], g[2];  // piece 0 grows from a, piece 1 from b
    double plain[2] = {0.0, 0.0};

    cplx cauchy(int piece, cplx pole) const {
        cplx s{};
        for (std::size_t i = 0; i < xi[piece].size(); ++i)
            s += g[piece][i] / (cplx(xi[piece][i], 0.0) - pole);
        return s;
    }
};

inline HatTable build_hat_table(const ImpulseProfile& prof, double kp2, double ks2,
                                int panels = 4) {
    const double a = *prof.a(), b = *prof.b();
    const auto& rule = unit_rule(panels);
    HatTable T;
    for (int piece = 0; piece < 2; ++piece) {
        const double k2 = piece == 0 ? kp2 : ks2;
        if (k2 == 0.0) continue;
        T.xi[piece].reserve(rule.x.size());
        T.g[piece].reserve(rule.x.size());
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            const double u = rule.x[i], s = 1.0 - u * u;
            const double xi = piece == 0 ? a + kp2 * s : b - ks2 * s;
            const double other = piece == 0 ? b - a - ks2 - kp2 * s : b - a - kp2 - ks2 * s;
            const double gi = rule.w[i] * 2.0 * theta0_deriv(prof, cplx(xi, 0.0)).real() *
                              std::sqrt(-xi) / std::sqrt(other);
            T.xi[piece].push_back(xi);
            T.g[piece].push_back(gi);
            T.plain[piece] += gi;
        }
    }
    return T;
}

// fixed rule for the upper unit arc carrying the rotational band integral
inline const UnitRule& band_arc_rule() { return unit_rule(4); }

}  // namespace detail

// square-root chart: (M, I) as smooth functions of signed coordinates k_prec
// (left root measured from a) and k_succ (right root from b).  Sign changes
// of either coordinate reverse the orientation of that gap piece alone, which
// is how the solution branch passes through a root-endpoint collision
inline std::pair<double, double> hat_MI(const ImpulseProfile& prof, double k_prec,
                                        double k_succ, double x, double t) {
    if (!prof.a() || !prof.b())
        throw domain_error("hat_MI: profile has no rotational spectral interval");
    detail::warn_if_not_analytic(prof);
    const double a = *prof.a(), b = *prof.b();
    const double kp2 = k_prec * k_prec, ks2 = k_succ * k_succ;
    const double root_Pi = std::sqrt(1.0 - a * ks2 + b * kp2 - kp2 * ks2);
    const auto T = detail::build_hat_table(prof, kp2, ks2);

    const double hatM = (x - t) / root_Pi + x + t - (4.0 * k_prec / pi) * T.plain[0] +
                        (4.0 * k_succ / pi) * T.plain[1];

    const double wl = a + kp2, wr = b - ks2;
    const double p = 0.5 * (wl + wr), q = 0.25 * (wr - wl) * (wr - wl);
    const auto hat_h = [&](cplx w) {
        return -(1.0 / (4.0 * detail::root_minus(w, 0))) *
               ((x - t) / (w * root_Pi) + (4.0 * k_prec / pi) * T.cauchy(0, w) -
                (4.0 * k_succ / pi) * T.cauchy(1, w));
    };
    const auto& arc = detail::band_arc_rule();
    cplx path{};
    for (std::size_t i = 0; i < arc.x.size(); ++i) {
        const cplx zeta = std::exp(cplx(0.0, pi * arc.x[i]));
        path += arc.w[i] * pi * cplx(0.0, 1.0) * zeta * detail::R_branch(zeta, p, q) *
                hat_h(zeta);
    }
    return {hatM, detail::band_path_sign * path.real()};
}

namespace detail {

inline ModulationState hat_state(const ImpulseProfile& prof, double kp, double ks, double x,
                                 double t) {
    ModulationState s;
    s.x = x;
    s.t = t;
    const double wl = *prof.a() + kp * kp, wr = *prof.b() - ks * ks;
    s.p = 0.5 * (wl + wr);
    s.q = 0.25 * (wr - wl) * (wr - wl);
    set_roots(s);
    refresh_derived(s);
    return s;
}

// shared continuation driver: march y = (y0, y1) from t = 0 along substeps,
// solving at each substep and accumulating Phi with a midpoint Simpson rule;
// emits the solved state at every requested time
template <class Solve, class State, class Emit>
void march_states(const std::vector<double>& ts, double h_max, const Solve& solve,
                  State& st, const Emit& emit) {
    double phi = st.Phi;
    for (const double t_goal : ts) {
        while (st.t != t_goal) {
            const double dir = t_goal > st.t ? 1.0 : -1.0;
            const State base = st;
            double h = std::min(h_max, std::abs(t_goal - base.t));
            for (int halvings = 0;; ++halvings) {
                const double t_end =
                    h >= std::abs(t_goal - base.t) * (1.0 - 1e-12) ? t_goal
                                                                   : base.t + dir * h;
                State mid = base, end = base;
                if (solve(mid, 0.5 * (base.t + t_end)) && solve(end, t_end)) {
                    phi += (t_end - base.t) / 6.0 *
                           (base.dPhi_dt + 4.0 * mid.dPhi_dt + end.dPhi_dt);
                    st = end;
                    st.Phi = phi;
                    break;
                }
                if (halvings >= 6) {
                    // near the separatrix the branch folds (the band endpoints
                    // collide, m -> 1) and no amount of step halving crosses it
                    if (base.m > 0.6)
                        throw domain_error(
                            "modulation continuation: separatrix reached near t = " +
                            std::to_string(t_end));
                    throw numeric_error("modulation continuation: stagnation at t = " +
                                        std::to_string(t_end));
                }
                h *= 0.5;
            }
        }
        emit(t_goal, st);
    }
}

}  // namespace detail

// rotational continuation in the square-root chart along t at fixed x; the
// requested times must be sorted outward from zero (one sign at a time)
inline std::vector<ModulationState> hat_track(const ImpulseProfile& prof, double x,
                                              const std::vector<double>& ts,
                                              double h_max = 0.025) {
    const auto st0 = initial_state(prof, x);
    if (st0.kind != WaveKind::Rotational)
        throw domain_error("hat_track: initial state is not rotational");
    const double sgn = x >= 0.0 ? 1.0 : -1.0;
    struct HatState : ModulationState {
        double kp = 0.0, ks = 0.0;
    };
    HatState st;
    static_cast<ModulationState&>(st) = st0;
    st.kp = sgn * std::sqrt(std::max(0.0, st0.w0.real() - *prof.a()));
    st.ks = sgn * std::sqrt(std::max(0.0, *prof.b() - st0.w1.real()));

    const auto solve = [&](HatState& s, double t_new) {
        const auto res = newton2(
            [&](double k0, double k1) { return hat_MI(prof, k0, k1, x, t_new); }, s.kp,
            s.ks, 1e-10, 30, 1e-7);
        if (!res.converged) return false;
        static_cast<ModulationState&>(s) = detail::hat_state(prof, res.x0, res.x1, x, t_new);
        s.kp = res.x0;
        s.ks = res.x1;
        return true;
    };
    std::vector<ModulationState> out;
    detail::march_states(ts, h_max, solve, st, [&](double, const HatState& s) {
        ModulationState e = s;
        // the band splice point is only root-found in unmixed orientations
        if (s.kp * s.ks >= 0.0 && s.t != 0.0)
            e.w_plus = find_w_plus(prof, s.p, s.q, x, s.t, s.kp + s.ks >= 0.0 ? +1 : -1);
        out.push_back(e);
    });
    return out;
}

// librational (or edge-free rotational) continuation in the (p, q) chart
inline std::vector<ModulationState> pq_track(const ImpulseProfile& prof, double x,
                                             const std::vector<double>& ts,
                                             double h_max = 0.025) {
    ModulationState st = initial_state(prof, x);
    const int sigma = x >= 0.0 ? +1 : -1;
    const WaveKind kind0 = st.kind;
    const auto solve = [&](ModulationState& s, double t_new) {
        const auto res = newton2(
            [&](double pp, double qq) {
                return std::pair{moment_M(prof, pp, qq, x, t_new, sigma),
                                 integral_I(prof, pp, qq, x, t_new, sigma)};
            },
            s.p, s.q, 1e-10, 30);
        if (!res.converged) return false;
        if ((s.q > 0.0) != (res.x1 > 0.0))
            throw numeric_error("pq_track: root configuration changed type");
        s.p = res.x0;
        s.q = res.x1;
        detail::set_roots(s);
        if (s.kind != kind0)
            throw numeric_error("pq_track: root configuration changed type");
        refresh_derived(s);
        s.t = t_new;
        return true;
    };
    std::vector<ModulationState> out;
    detail::march_states(ts, h_max, solve, st, [&](double, const ModulationState& s) {
        ModulationState e = s;
        if (e.kind == WaveKind::Rotational && e.t != 0.0)
            e.w_plus = find_w_plus(prof, e.p, e.q, x, e.t, sigma);
        out.push_back(e);
    });
    return out;
}

// states along a fixed-x time grid, returned in ascending time order;
// rotational data goes through the square-root chart (uniform across
// root-endpoint collisions), librational data through the (p, q) chart
inline std::vector<ModulationState> modulation_track(const ImpulseProfile& prof, double x,
                                                     std::vector<double> ts,
                                                     double h_max = 0.025) {
    std::sort(ts.begin(), ts.end());
    const bool has_neg = !ts.empty() && ts.front() < 0.0;
    if (has_neg && ts.back() > 0.0)
        throw domain_error("modulation_track: mix of time signs; track each separately");
    if (has_neg) std::reverse(ts.begin(), ts.end());
    auto out = initial_state(prof, x).kind == WaveKind::Rotational
                   ? hat_track(prof, x, ts, h_max)
                   : pq_track(prof, x, ts, h_max);
    if (has_neg) std::reverse(out.begin(), out.end());
    return out;
}

inline ModulationState modulation_state_at(const ImpulseProfile& prof, double x, double t) {
    return modulation_track(prof, x, {t}).front();
}

// single-point continuation from (x, t) = (0, 0); retained as the natural
// entry point for states whose t = 0 roots already sit on the interval ends
inline ModulationState origin_continue(const ImpulseProfile& prof, double x, double t) {
    if (!prof.a() || !prof.b())
        throw domain_error("origin_continue: profile has no rotational spectral interval");
    return hat_track(prof, x, {t}).front();
}

}  // namespace fluxon
