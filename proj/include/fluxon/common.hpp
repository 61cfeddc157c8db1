#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fluxon {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

// error taxonomy shared by the CLI exit-code mapping
struct domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// one field sample of the sine-Gordon solution at (x,t)
struct WaveSample {
    double x = 0, t = 0;
    double cos_half = 1;  // cos(u/2)
    double sin_half = 0;  // sin(u/2)
    double eps_ut = 0;    // eps * du/dt
    double u_mod4pi = 0;  // u modulo 4*pi, in [-2*pi, 2*pi)
    bool ok = true;
    std::string error;
};

inline double wrap_4pi(double u) {
    double w = std::remainder(u, 4 * pi);  // (-2pi, 2pi]
    if (w >= 2 * pi) w -= 4 * pi;
    return w;
}

}  // namespace fluxon
