#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <type_traits>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "fluxon/common.hpp"

namespace fluxon {

// ---------------------------------------------------------------------------
// tanh-sinh quadrature with automatic level refinement.
//
// Nodes are x = tanh((pi/2) sinh t) on a fixed trapezoid ladder in t; each
// level halves the step and reuses previous evaluations. Abscissas are kept
// as exact distances from the endpoints so integrands with inverse-square-root
// endpoint singularities can be evaluated far below the resolution of the
// abscissa itself. Integrands may be called either as f(x) or as f(x, d)
// where d is a signed offset from the nearest endpoint: x = a + d (d > 0) on
// the left half, x = b + d (d < 0) on the right half.
// ---------------------------------------------------------------------------

namespace detail {

struct TsNode {
    double dist;    // distance from the nearer endpoint of (-1, 1), in (0, 1]
    double weight;  // (pi/2) cosh t sech^2((pi/2) sinh t)
};

// positive-t half ladder; level 0 holds t = h0, 2 h0, ...; level k > 0 holds
// the odd multiples of h0 / 2^k
inline const std::vector<std::vector<TsNode>>& ts_levels() {
    static const std::vector<std::vector<TsNode>> levels = [] {
        constexpr double t_max = 3.75;
        constexpr double h0 = 0.25;
        constexpr int n_levels = 10;
        std::vector<std::vector<TsNode>> lv(n_levels);
        for (int k = 0; k < n_levels; ++k) {
            const double h = h0 / (1 << k);
            const int stride = (k == 0) ? 1 : 2;
            for (int j = 1; j * h <= t_max + 1e-12; j += stride) {
                if (k > 0 && j % 2 == 0) continue;
                const double t = j * h;
                const double s = 0.5 * pi * std::sinh(t);
                const double e2s = std::exp(-2.0 * s);
                const double dist = 2.0 * e2s / (1.0 + e2s);          // 1 - tanh s
                const double sech2 = 4.0 * e2s / ((1.0 + e2s) * (1.0 + e2s));
                lv[k].push_back({dist, 0.5 * pi * std::cosh(t) * sech2});
            }
        }
        return lv;
    }();
    return levels;
}

template <class F>
auto ts_call(const F& f, double x, double d) {
    if constexpr (std::is_invocable_v<const F&, double, double>)
        return f(x, d);
    else
        return f(x);
}

}  // namespace detail

template <class F>
auto tanh_sinh(const F& f, double a, double b, double tol = 1e-12, int min_level = 3) {
    using R = decltype(detail::ts_call(f, a, (b - a) / 2));
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const auto& levels = detail::ts_levels();

    // center node, t = 0: x = mid, weight pi/2
    R sum = detail::ts_call(f, mid, mid - a) * (0.5 * pi);
    double h = 0.25;
    R prev = sum;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        R add{};
        for (const auto& nd : levels[k]) {
            const double d = half * nd.dist;
            add += detail::ts_call(f, a + d, d) * nd.weight;
            add += detail::ts_call(f, b - d, -d) * nd.weight;
        }
        if (k == 0) {
            sum = (sum + add) * h;
        } else {
            h *= 0.5;
            sum = sum * 0.5 + add * h;
        }
        if (static_cast<int>(k) >= min_level) {
            const double change = std::abs(sum - prev);
            if (change <= tol * (1.0 + std::abs(sum))) return sum * half;
        }
        prev = sum;
    }
    return sum * half;
}

// ---------------------------------------------------------------------------
// composite Gauss-Legendre on smooth (possibly complex-valued) integrands;
// panel count doubles until two refinements agree
// ---------------------------------------------------------------------------

template <class F>
auto gauss_panels(const F& f, double a, double b, double tol = 1e-12, int max_doublings = 9) {
    using G = boost::math::quadrature::gauss<double, 30>;
    using R = decltype(f(a));
    int n = 1;
    R prev{};
    for (int it = 0; it <= max_doublings; ++it) {
        R s{};
        const double w = (b - a) / n;
        for (int i = 0; i < n; ++i) s += G::integrate(f, a + i * w, a + (i + 1) * w);
        if (it > 0 && std::abs(s - prev) <= tol * (1.0 + std::abs(s))) return s;
        prev = s;
        n *= 2;
    }
    return prev;
}

// ---------------------------------------------------------------------------
// bracketed root finding (Brent-Dekker)
// ---------------------------------------------------------------------------

template <class F>
double brent(const F& f, double a, double b, double tol = 1e-14, int max_iter = 200) {
    double fa = f(a), fb = f(b);
    if (fa == 0) return a;
    if (fb == 0) return b;
    if (fa * fb > 0) throw numeric_error("brent: root not bracketed");
    double c = a, fc = fa, d = b - a, e = d;
    for (int it = 0; it < max_iter; ++it) {
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * tol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2 * xm * s;
                q = 1 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2 * xm * q * (q - r) - (b - a) * (r - 1));
                q = (q - 1) * (r - 1) * (s - 1);
            }
            if (p > 0) q = -q;
            p = std::abs(p);
            if (2 * p < std::min(3 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
        fb = f(b);
        if ((fb > 0) == (fc > 0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    throw numeric_error("brent: too many iterations");
}

// ---------------------------------------------------------------------------
// damped Newton for a 2x2 real system with finite-difference Jacobian
// ---------------------------------------------------------------------------

struct Newton2Result {
    double x0 = 0, x1 = 0;
    double r0 = 0, r1 = 0;  // residual at the solution
    int iterations = 0;
    bool converged = false;
};

template <class F>
Newton2Result newton2(const F& f, double x0, double x1, double tol = 1e-10, int max_iter = 40,
                      double fd_scale = 1e-6) {
    auto [r0, r1] = f(x0, x1);
    double rn = std::hypot(r0, r1);
    Newton2Result out{x0, x1, r0, r1, 0, rn <= tol};
    for (int it = 1; it <= max_iter && rn > tol; ++it) {
        const double h0 = fd_scale * std::max(1.0, std::abs(x0));
        const double h1 = fd_scale * std::max(1.0, std::abs(x1));
        auto [a0, a1] = f(x0 + h0, x1);
        auto [b0, b1] = f(x0 - h0, x1);
        auto [c0, c1] = f(x0, x1 + h1);
        auto [d0, d1] = f(x0, x1 - h1);
        const double j00 = (a0 - b0) / (2 * h0), j01 = (c0 - d0) / (2 * h1);
        const double j10 = (a1 - b1) / (2 * h0), j11 = (c1 - d1) / (2 * h1);
        const double det = j00 * j11 - j01 * j10;
        if (det == 0 || !std::isfinite(det)) break;
        const double dx0 = -(j11 * r0 - j01 * r1) / det;
        const double dx1 = -(-j10 * r0 + j00 * r1) / det;
        double lambda = 1.0;
        for (int halve = 0; halve < 12; ++halve) {
            auto [t0, t1] = f(x0 + lambda * dx0, x1 + lambda * dx1);
            const double tn = std::hypot(t0, t1);
            if (tn < rn || !std::isfinite(rn)) {
                x0 += lambda * dx0;
                x1 += lambda * dx1;
                r0 = t0;
                r1 = t1;
                rn = tn;
                break;
            }
            lambda *= 0.5;
            if (halve == 11) {  // stagnation: accept the full step and hope
                x0 += dx0;
                x1 += dx1;
                std::tie(r0, r1) = f(x0, x1);
                rn = std::hypot(r0, r1);
            }
        }
        out = {x0, x1, r0, r1, it, rn <= tol};
    }
    out.converged = rn <= tol;
    return out;
}

}  // namespace fluxon
