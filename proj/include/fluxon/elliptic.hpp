#pragma once

#include <array>
#include <cmath>

#include "fluxon/common.hpp"

namespace fluxon {

// ---------------------------------------------------------------------------
// complete elliptic integrals, parameter convention K(m) with m = k^2
// ---------------------------------------------------------------------------

inline double complete_K(double m) {
    if (m < 0 || m >= 1) throw domain_error("complete_K: need 0 <= m < 1");
    double a = 1.0, b = std::sqrt(1.0 - m);
    for (int i = 0; i < 40 && std::abs(a - b) > 4e-16 * a; ++i) {
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return 0.5 * pi / a;
}

inline double complete_E(double m) {
    if (m < 0 || m > 1) throw domain_error("complete_E: need 0 <= m <= 1");
    if (m == 1) return 1.0;
    double a = 1.0, b = std::sqrt(1.0 - m);
    double csum = 0.5 * m;  // 2^{n-1} c_n^2 at n = 0, with c_0^2 = m
    double pow2 = 0.5;
    for (int i = 0; i < 40 && std::abs(a - b) > 4e-16 * a; ++i) {
        const double c = 0.5 * (a - b);
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
        pow2 *= 2;
        csum += pow2 * c * c;
    }
    return (0.5 * pi / a) * (1.0 - csum);
}

// dK/dm and dE/dm
inline double complete_K_deriv(double m) {
    const double K = complete_K(m), E = complete_E(m);
    return (E - (1.0 - m) * K) / (2.0 * m * (1.0 - m));
}

inline double complete_E_deriv(double m) {
    return (complete_E(m) - complete_K(m)) / (2.0 * m);
}

// ---------------------------------------------------------------------------
// Jacobi elliptic functions, Bulirsch's descending-AGM scheme
// ---------------------------------------------------------------------------

struct JacobiSCD {
    double sn, cn, dn;
};

inline JacobiSCD jacobi_sn_cn_dn(double u, double m) {
    if (m < 0 || m >= 1) throw domain_error("jacobi_sn_cn_dn: need 0 <= m < 1");
    double mc = 1.0 - m;
    if (mc == 1.0) return {std::sin(u), std::cos(u), 1.0};

    constexpr double CA = 1e-8;  // accuracy is CA^2
    std::array<double, 16> em{}, en{};
    double a = 1.0, dn = 1.0, c = 0.0;
    int l = 0;
    for (int i = 0; i < 16; ++i) {
        l = i;
        em[i] = a;
        mc = std::sqrt(mc);
        en[i] = mc;
        c = 0.5 * (a + mc);
        if (std::abs(a - mc) <= CA * a) break;
        mc *= a;
        a = c;
    }
    u *= c;
    double sn = std::sin(u), cn = std::cos(u);
    if (sn != 0.0) {
        double aa = cn / sn;
        c *= aa;
        for (int i = l; i >= 0; --i) {
            const double b = em[i];
            aa *= c;
            c *= dn;
            dn = (en[i] + aa) / (b + aa);
            aa = c / b;
        }
        const double inv = 1.0 / std::sqrt(c * c + 1.0);
        sn = (sn >= 0.0) ? inv : -inv;
        cn = c * sn;
    }
    return {sn, cn, dn};
}

// ---------------------------------------------------------------------------
// Riemann theta series with a single complex parameter H, Re H < 0:
//   Theta(z; H) = sum_n exp(H n^2 / 2) exp(n z)
// Gaussian decay makes |n| <= ceil(sqrt(80/|Re H|)) + 4 enough for 1e-16 tails.
// ---------------------------------------------------------------------------

inline cplx riemann_theta(cplx z, cplx H) {
    if (!(H.real() < 0)) throw domain_error("riemann_theta: need Re H < 0");
    const int N = static_cast<int>(std::ceil(std::sqrt(80.0 / std::abs(H.real())))) + 4;
    cplx s{1.0, 0.0};
    for (int n = N; n >= 1; --n) {
        const cplx g = std::exp(0.5 * H * static_cast<double>(n) * static_cast<double>(n));
        const double dn = n;
        s += g * (std::exp(dn * z) + std::exp(-dn * z));
    }
    return s;
}

// partial derivative of riemann_theta with respect to z
inline cplx riemann_theta_dz(cplx z, cplx H) {
    if (!(H.real() < 0)) throw domain_error("riemann_theta_dz: need Re H < 0");
    const int N = static_cast<int>(std::ceil(std::sqrt(80.0 / std::abs(H.real())))) + 4;
    cplx s{0.0, 0.0};
    for (int n = N; n >= 1; --n) {
        const cplx g = std::exp(0.5 * H * static_cast<double>(n) * static_cast<double>(n));
        const double dn = n;
        s += g * dn * (std::exp(dn * z) - std::exp(-dn * z));
    }
    return s;
}

// parameter bundle tying m to the theta-parameter H0 = -2 pi K(1-m) / K(m)
struct EllipticParams {
    double m;
    double K;
    double Kprime;
    double E_int;
    double H0;
};

inline EllipticParams make_elliptic_params(double m) {
    if (m <= 0 || m >= 1) throw domain_error("make_elliptic_params: need 0 < m < 1");
    EllipticParams p{};
    p.m = m;
    p.K = complete_K(m);
    p.Kprime = complete_K(1.0 - m);
    p.E_int = complete_E(m);
    p.H0 = -2.0 * pi * p.Kprime / p.K;
    return p;
}

}  // namespace fluxon
