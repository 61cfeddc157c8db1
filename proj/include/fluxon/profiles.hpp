#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <utility>

#include "fluxon/common.hpp"
#include "fluxon/numerics.hpp"

namespace fluxon {

enum class ProfileKind { Sech, FromScrG };

// Even, negative, bell-shaped impulse profile G(x). Either the closed-form
// G(x) = -4A sech(x), or a profile defined through the positive shape function
// scrG(m) on (0, G(0)^2), from which the inverse x = G^{-1}(G) is recovered by
// quadrature and G itself by monotone root finding.
class ImpulseProfile {
public:
    static ImpulseProfile sech(double A) {
        if (!(A > 0)) throw domain_error("ImpulseProfile::sech: need A > 0");
        ImpulseProfile p;
        p.kind_ = ProfileKind::Sech;
        p.amplitude_ = A;
        p.g0_ = -4.0 * A;
        p.l1_ = 4.0 * pi * A;
        p.finish_constants();
        return p;
    }

    static ImpulseProfile from_scr_g(std::function<double(double)> scrG, double g0) {
        if (!(g0 < 0)) throw domain_error("ImpulseProfile::from_scr_g: need G(0) < 0");
        if (!scrG) throw domain_error("ImpulseProfile::from_scr_g: missing shape function");
        ImpulseProfile p;
        p.kind_ = ProfileKind::FromScrG;
        p.scr_g_ = std::move(scrG);
        p.g0_ = g0;
        const double top = g0 * g0;
        for (int i = 1; i < 32; ++i) {
            const double m = top * i / 32.0;
            if (!(p.scr_g_(m) > 0))
                throw domain_error("ImpulseProfile::from_scr_g: shape function not positive");
        }
        // ||G||_1 = 2 int_0^{G(0)^2} scrG(m) / (sqrt(m) sqrt(G(0)^2 - m)) dm
        p.l1_ = 2.0 * tanh_sinh(
                          [&](double m, double d) {
                              const double lo = d > 0 ? d : m;
                              const double hi = d < 0 ? -d : top - m;
                              return p.scr_g_(m) / std::sqrt(lo * hi);
                          },
                          0.0, top, 1e-12);
        p.finish_constants();
        return p;
    }

    // G(x); even in x
    double operator()(double x) const {
        const double ax = std::abs(x);
        if (kind_ == ProfileKind::Sech) return -4.0 * amplitude_ / std::cosh(ax);
        if (ax == 0.0) return g0_;
        // invert the monotone map g -> inverse(g) on (g0, 0)
        const double lo = 1e-14, hi = 1.0 - 1e-13;
        const auto f = [&](double s) { return inverse(g0_ * (1.0 - s)) - ax; };
        if (f(lo) >= 0) return g0_;  // x below the flat-top resolution
        if (f(hi) < 0)
            throw numeric_error("ImpulseProfile: x beyond the resolvable tail of G");
        const double s = brent(f, lo, hi, 1e-14);
        return g0_ * (1.0 - s);
    }

    // x >= 0 with G(x) = g, defined for g in (g0, 0)
    double inverse(double g) const {
        if (!(g > g0_ && g < 0))
            throw domain_error("ImpulseProfile::inverse: need G(0) < g < 0");
        if (kind_ == ProfileKind::Sech) return std::acosh(4.0 * amplitude_ / (-g));
        const double top = g0_ * g0_;
        return tanh_sinh(
            [&](double m, double d) {
                const double hi = d < 0 ? -d : top - m;
                return scr_g_(m) / (m * std::sqrt(hi));
            },
            g * g, top, 1e-12);
    }

    ProfileKind kind() const { return kind_; }
    double g0() const { return g0_; }
    double l1_norm() const { return l1_; }

    // G(x_crit) = -2; defined only when G(0) < -2
    std::optional<double> x_crit() const { return x_crit_; }

    // endpoints of the kink accumulation interval, a < -1 < b < 0, a b = 1;
    // defined only when G(0) < -2
    std::optional<double> a() const { return a_; }
    std::optional<double> b() const { return b_; }

    // whether the phase integral extends holomorphically off the real spectrum
    // interval in closed form (contour work off the axis is validated for these)
    bool analytic_continuation() const { return kind_ == ProfileKind::Sech; }

    // amplitude A for the sech kind
    double amplitude() const {
        if (kind_ != ProfileKind::Sech) throw domain_error("ImpulseProfile: not a sech profile");
        return amplitude_;
    }

    // shape function value for the FromScrG kind
    double scr_g(double m) const {
        if (kind_ != ProfileKind::FromScrG)
            throw domain_error("ImpulseProfile: no shape function for this kind");
        return scr_g_(m);
    }

private:
    ImpulseProfile() = default;

    void finish_constants() {
        if (g0_ < -2.0) {
            const double root = std::sqrt(g0_ * g0_ - 4.0);
            a_ = -0.25 * (root - g0_) * (root - g0_);
            b_ = 1.0 / *a_;
            x_crit_ = inverse(-2.0);
        }
    }

    ProfileKind kind_ = ProfileKind::Sech;
    double amplitude_ = 0;
    std::function<double(double)> scr_g_;
    double g0_ = -1;
    double l1_ = 0;
    std::optional<double> x_crit_;
    std::optional<double> a_;
    std::optional<double> b_;
};

}  // namespace fluxon
