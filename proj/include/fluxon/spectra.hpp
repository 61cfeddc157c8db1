#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "fluxon/common.hpp"
#include "fluxon/numerics.hpp"
#include "fluxon/profiles.hpp"

namespace fluxon {

// ---------------------------------------------------------------------------
// spectral-plane maps; the radical is the principal branch of sqrt(-w), so all
// three are single-valued off the positive real axis
// ---------------------------------------------------------------------------

namespace detail {
inline cplx root_minus(cplx w, int side) {
    if (w.imag() == 0 && w.real() >= 0) {
        if (w.real() == 0 || side == 0)
            throw domain_error("spectral map: w on [0, inf) needs an explicit side");
        const double r = std::sqrt(w.real());
        return side > 0 ? cplx(0.0, r) : cplx(0.0, -r);
    }
    return std::sqrt(-w);
}
}  // namespace detail

inline cplx E_of(cplx w, int side = 0) {
    const cplx s = detail::root_minus(w, side);
    return cplx(0.0, 0.25) * (s + 1.0 / s);
}

inline cplx D_of(cplx w, int side = 0) {
    const cplx s = detail::root_minus(w, side);
    return cplx(0.0, 0.25) * (s - 1.0 / s);
}

inline cplx Q_of(cplx w, double x, double t, int side = 0) {
    return E_of(w, side) * x + D_of(w, side) * t;
}

inline cplx E_deriv(cplx w) { return cplx(0.0, 0.125) * (1.0 + w) / std::pow(-w, 1.5); }

// v(w) = -4i E(w) = sqrt(-w) + 1/sqrt(-w), real and >= 2 on w < 0
inline double v_of_negative(double w) {
    if (!(w < 0)) throw domain_error("v_of_negative: need w < 0");
    const double s = std::sqrt(-w);
    return s + 1.0 / s;
}

// ---------------------------------------------------------------------------
// WKB phase integral and its inverse transform
// ---------------------------------------------------------------------------

// Psi(iv/4) = 1/2 int_0^{G^{-1}(-v)} sqrt(G(s)^2 - v^2) ds, 0 < v < -G(0)
inline double wkb_phase(const ImpulseProfile& prof, double v) {
    const double span = -prof.g0();
    if (!(v > 0 && v < span)) throw domain_error("wkb_phase: need 0 < v < -G(0)");
    if (prof.kind() == ProfileKind::FromScrG) {
        // same integral under m = G(s)^2, expressed through the defining shape
        // function: Psi = 1/2 int_{v^2}^{G(0)^2} sqrt(m-v^2) scrG(m) dm / (m sqrt(G(0)^2-m))
        const double top = span * span, v2 = v * v;
        return 0.5 * tanh_sinh(
                         [&](double m, double d) {
                             const double hi = d < 0 ? -d : top - m;
                             return std::sqrt(std::max(0.0, m - v2)) * prof.scr_g(m) /
                                    (m * std::sqrt(hi));
                         },
                         v2, top, 1e-10);
    }
    const double X = prof.inverse(-v);
    return 0.5 * tanh_sinh(
                     [&](double s) {
                         const double g = prof(s);
                         return std::sqrt(std::max(0.0, g * g - v * v));
                     },
                     0.0, X, 1e-10);
}

// phi(v) = d Psi(iv/4) / dv by central differences, window clamped inside (0, -G(0))
inline double wkb_phase_deriv(const ImpulseProfile& prof, double v) {
    const double span = -prof.g0();
    if (!(v > 0 && v < span)) throw domain_error("wkb_phase_deriv: need 0 < v < -G(0)");
    const double h = std::min(1e-5 * span, 0.45 * std::min(v, span - v));
    return (wkb_phase(prof, v + h) - wkb_phase(prof, v - h)) / (2.0 * h);
}

// G^{-1}(w) = -(4/pi) int_{-w}^{-G(0)} phi(v) dv / sqrt(v^2 - w^2), G(0) < w < 0
inline double abel_inverse(const ImpulseProfile& prof, double w) {
    const double span = -prof.g0();
    if (!(w > prof.g0() && w < 0)) throw domain_error("abel_inverse: need G(0) < w < 0");
    const double v0 = -w;
    const double val = tanh_sinh(
        [&](double v, double d) {
            const double lo = d > 0 ? d : v - v0;  // v + w
            // nodes can round onto the endpoint; phi is finite there, so step inside
            const double vv = span - std::max(span - v, 1e-13 * span);
            return wkb_phase_deriv(prof, vv) / std::sqrt(lo * (v + v0));
        },
        v0, span, 1e-9);
    return -4.0 / pi * val;
}

// theta0(w) = Psi(E(w)) for real w in the kink accumulation range
inline double theta0(const ImpulseProfile& prof, double w) {
    return wkb_phase(prof, v_of_negative(w));
}

// d theta0 / dw continued off the real axis. For the sech profile Psi is an
// entire linear function of the eigenvalue and theta0'(w) = i pi E'(w) exactly;
// otherwise a Taylor continuation of phi about Re v(w) is used (callers treat
// non-sech off-axis work as unvalidated and warn).
inline cplx theta0_deriv(const ImpulseProfile& prof, cplx w) {
    if (prof.kind() == ProfileKind::Sech) return cplx(0.0, pi) * E_deriv(w);
    const cplx s = detail::root_minus(w, 0);
    const cplx v = s + 1.0 / s;
    const cplx vprime = (1.0 + w) / (2.0 * std::pow(-w, 1.5));
    const double vr = v.real();
    const double span = -prof.g0();
    if (!(vr > 0 && vr < span))
        throw domain_error("theta0_deriv: Re v(w) outside the phase-integral range");
    if (w.imag() == 0 && v.imag() == 0) return wkb_phase_deriv(prof, vr) * vprime;
    const double h = std::min(1e-4 * span, 0.3 * std::min(vr, span - vr));
    const double p0 = wkb_phase_deriv(prof, vr);
    const double pp = (wkb_phase_deriv(prof, vr + h) - wkb_phase_deriv(prof, vr - h)) / (2 * h);
    const double ppp =
        (wkb_phase_deriv(prof, vr + h) - 2 * p0 + wkb_phase_deriv(prof, vr - h)) / (h * h);
    const cplx dv = v - vr;
    return (p0 + pp * dv + 0.5 * ppp * dv * dv) * vprime;
}

// ---------------------------------------------------------------------------
// WKB spectrum and the w-plane pole locus
// ---------------------------------------------------------------------------

enum class PoleKind { Kink, Breather };

enum class DeltaConfig { DeltaEmpty, NablaEmpty, DeltaPrecK, DeltaKSucc, NablaPrecK, NablaKSucc };

struct PoleRecord {
    cplx w;
    int k = 0;           // index into v_k
    PoleKind kind = PoleKind::Breather;
    int sign = 1;        // proportionality constant (-1)^{k+1}
    bool in_delta = false;
};

struct ScatteringData {
    int N = 0;
    double eps = 0;
    std::vector<double> v_k;      // strictly decreasing
    std::vector<PoleRecord> poles;  // 2N records
    DeltaConfig delta_config = DeltaConfig::DeltaEmpty;
    std::optional<double> tau_N;
};

inline int delta_count(const ScatteringData& sd) {
    int n = 0;
    for (const auto& p : sd.poles) n += p.in_delta ? 1 : 0;
    return n;
}

// v_k solve Psi(i v/4) = pi eps (k + 1/2) on the strictly decreasing branch
inline ScatteringData bohr_sommerfeld(const ImpulseProfile& prof, int N) {
    if (N < 1) throw domain_error("bohr_sommerfeld: need N >= 1");
    ScatteringData sd;
    sd.N = N;
    sd.eps = prof.l1_norm() / (4.0 * pi * N);
    const double span = -prof.g0();
    const double lo = 1e-9 * span, hi = span * (1.0 - 1e-9);
    for (int k = 0; k < N; ++k) {
        const double target = pi * sd.eps * (k + 0.5);
        const double v =
            brent([&](double vv) { return wkb_phase(prof, vv) - target; }, lo, hi, 1e-13);
        if (std::abs(v - 2.0) < 1e-9)
            throw domain_error("bohr_sommerfeld: eigenvalue too close to the kink threshold");
        sd.v_k.push_back(v);
        const int sign = (k % 2 == 0) ? -1 : 1;
        if (v > 2.0) {
            const double s = 0.5 * (v + std::sqrt(v * v - 4.0));
            sd.poles.push_back({cplx(-s * s, 0.0), k, PoleKind::Kink, sign, false});
            sd.poles.push_back({cplx(-1.0 / (s * s), 0.0), k, PoleKind::Kink, sign, false});
        } else {
            const double th = std::acos(0.5 * v);
            const cplx w(-std::cos(2 * th), -std::sin(2 * th));
            sd.poles.push_back({w, k, PoleKind::Breather, sign, false});
            sd.poles.push_back({std::conj(w), k, PoleKind::Breather, sign, false});
        }
    }
    return sd;
}

// theta0(tau_N) = pi eps floor(theta0(tau_inf) / (pi eps)), solved near tau_inf
inline double transition_point(const ImpulseProfile& prof, double tau_inf, int N) {
    if (!prof.a() || !prof.b())
        throw domain_error("transition_point: profile has no kink interval");
    const double a = *prof.a(), b = *prof.b();
    if (!((tau_inf > a && tau_inf < -1) || (tau_inf > -1 && tau_inf < b)))
        throw domain_error("transition_point: tau_inf outside (a,-1) u (-1,b)");
    const double eps = prof.l1_norm() / (4.0 * pi * N);
    const double target = pi * eps * std::floor(theta0(prof, tau_inf) / (pi * eps));
    const double margin = 1e-9 * (b - a);
    // theta0 increases on (a,-1) and decreases on (-1,b), vanishing at both ends
    const double lo = tau_inf < -1 ? a + margin : tau_inf;
    const double hi = tau_inf < -1 ? tau_inf : b - margin;
    return brent([&](double w) { return theta0(prof, w) - target; }, lo, hi, 1e-13);
}

// mark the poles of Delta for one of the six configurations; tau is required
// for the four mixed configurations and ignored otherwise
inline void apply_delta_config(ScatteringData& sd, DeltaConfig cfg,
                               std::optional<double> tau = std::nullopt) {
    const bool mixed = cfg != DeltaConfig::DeltaEmpty && cfg != DeltaConfig::NablaEmpty;
    if (mixed && !tau) throw domain_error("apply_delta_config: configuration needs tau_N");
    const auto kink_left_of_tau = [&](const PoleRecord& p) {
        return p.kind == PoleKind::Kink && p.w.real() <= *tau;
    };
    const auto kink_right_of_tau = [&](const PoleRecord& p) {
        return p.kind == PoleKind::Kink && p.w.real() >= *tau;
    };
    for (auto& p : sd.poles) {
        switch (cfg) {
            case DeltaConfig::DeltaEmpty: p.in_delta = false; break;
            case DeltaConfig::NablaEmpty: p.in_delta = true; break;
            case DeltaConfig::DeltaPrecK: p.in_delta = kink_left_of_tau(p); break;
            case DeltaConfig::DeltaKSucc: p.in_delta = kink_right_of_tau(p); break;
            case DeltaConfig::NablaPrecK: p.in_delta = !kink_left_of_tau(p); break;
            case DeltaConfig::NablaKSucc: p.in_delta = !kink_right_of_tau(p); break;
        }
    }
    sd.delta_config = cfg;
    sd.tau_N = mixed ? tau : std::nullopt;
}

}  // namespace fluxon
