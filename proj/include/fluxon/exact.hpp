#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "fluxon/common.hpp"
#include "fluxon/spectra.hpp"

namespace fluxon {

// ---------------------------------------------------------------------------
// Reflectionless inverse scattering by partial fractions. Unfolding w = z^2
// maps the 2N poles to z_y = i sqrt(-y) in the upper half-plane; the ansatz
//
//   S(z) = I + sum_y [ C_y / (z - z_y) - s2 C_y s2 / (z + z_y) ]
//
// is single-valued with the mirror symmetry S(-z) = s2 S(z) s2 built in. A
// nabla pole constrains the first column of C_y, a Delta pole the second, and
// matching the residue conditions yields a dense 4N-square complex system.
// ---------------------------------------------------------------------------

struct ResidueSystem {
    std::vector<cplx> z;        // upper half-plane pole images, one per pole record
    std::vector<char> is_delta;
    std::vector<char> decoupled;  // rows replaced by "unknown = 0" after underflow
    Eigen::MatrixXcd matrix;
    Eigen::VectorXcd rhs;
    double cond_estimate = 1.0;
    std::vector<Eigen::Vector2cd> unknowns;  // filled by the solve
};

namespace detail {

struct LogPhase {
    double log_mag = 0;
    double phase = 0;
    cplx value() const { return std::exp(log_mag) * cplx(std::cos(phase), std::sin(phase)); }
    void mul(cplx f) {
        log_mag += std::log(std::abs(f));
        phase += std::arg(f);
    }
};

// residue of the Blaschke ratio product at pole j, as log magnitude and phase:
// Res_{w=y} Pi_N = 4y * prod_{p same side, p != j} (s_j+s_p)/(s_j-s_p)
//                     * prod_{q other side} (s_j-s_q)/(s_j+s_q),  s = sqrt(-w)
// ("side" is membership of Delta; for a Delta pole this is the residue of the
// reciprocal product, which is the one entering its residue condition)
inline LogPhase log_blaschke_residue(const ScatteringData& sd, int j) {
    const cplx sj = std::sqrt(-sd.poles[j].w);
    LogPhase acc;
    acc.mul(4.0 * sd.poles[j].w);
    for (int p = 0; p < static_cast<int>(sd.poles.size()); ++p) {
        if (p == j) continue;
        if (std::abs(sd.poles[p].w - sd.poles[j].w) < 1e-12)
            throw numeric_error("blaschke_residue: degenerate spectrum (coincident poles)");
        const cplx sp = std::sqrt(-sd.poles[p].w);
        const bool same = sd.poles[p].in_delta == sd.poles[j].in_delta;
        acc.mul(same ? (sj + sp) / (sj - sp) : (sj - sp) / (sj + sp));
    }
    return acc;
}

}  // namespace detail

inline cplx blaschke_residue(const ScatteringData& sd, int pole_index) {
    return detail::log_blaschke_residue(sd, pole_index).value();
}

inline ResidueSystem assemble_system(const ScatteringData& sd, double x, double t) {
    const int n = static_cast<int>(sd.poles.size());
    ResidueSystem rs;
    rs.z.resize(n);
    rs.is_delta.resize(n);
    rs.decoupled.assign(n, 0);
    rs.matrix = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    rs.rhs = Eigen::VectorXcd::Zero(2 * n);

    std::vector<cplx> s(n);
    for (int j = 0; j < n; ++j) {
        s[j] = std::sqrt(-sd.poles[j].w);
        rs.z[j] = cplx(0.0, 1.0) * s[j];
        rs.is_delta[j] = sd.poles[j].in_delta ? 1 : 0;
    }

    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    Eigen::Matrix2cd i_s2;  // i * sigma_2
    i_s2 << 0.0, 1.0, -1.0, 0.0;

    for (int j = 0; j < n; ++j) {
        const bool del = rs.is_delta[j];
        // coupling kappa_j = (-1)^{k+1} e^{sigma 2iQ(y)/eps} Res Pi / (2 z_j),
        // with sigma = -1 and the reciprocal product on Delta rows
        detail::LogPhase kappa = detail::log_blaschke_residue(sd, j);
        const cplx expo =
            cplx(0.0, del ? -2.0 : 2.0) * Q_of(sd.poles[j].w, x, t) / sd.eps;
        kappa.log_mag += expo.real();
        kappa.phase += expo.imag();
        kappa.mul(1.0 / (2.0 * rs.z[j]));
        if (sd.poles[j].sign < 0) kappa.phase += pi;

        if (kappa.log_mag < std::log(1e-30)) {
            rs.decoupled[j] = 1;
            rs.matrix.block<2, 2>(2 * j, 2 * j) = id;
            continue;
        }
        // row equation: u_j = kappa_j [ e_base + sum_p K_{jp} u_p ], scaled by
        // 1/kappa_j when |kappa_j| > 1 so entries stay bounded
        const bool scaled = kappa.log_mag > 0.0;
        const cplx kap = scaled ? 1.0 : kappa.value();
        const cplx inv_kap =
            scaled ? std::exp(-kappa.log_mag) * cplx(std::cos(kappa.phase), -std::sin(kappa.phase))
                   : 1.0;
        const cplx row_factor = scaled ? 1.0 : kap;  // multiplies the couplings and rhs

        rs.matrix.block<2, 2>(2 * j, 2 * j) += (scaled ? inv_kap : 1.0) * id;
        for (int p = 0; p < n; ++p) {
            Eigen::Matrix2cd K;
            if (rs.is_delta[p] == rs.is_delta[j]) {
                const cplx c = 1.0 / (rs.z[j] + rs.z[p]);
                K = (del ? -c : c) * i_s2;
            } else {
                K = (1.0 / (rs.z[j] - rs.z[p])) * id;
            }
            rs.matrix.block<2, 2>(2 * j, 2 * p) -= row_factor * K;
        }
        rs.rhs(2 * j + (del ? 0 : 1)) = row_factor;
    }
    return rs;
}

struct ExactDiagnostics {
    double cond_estimate = 1.0;
    double max_imag = 0.0;  // largest imaginary residue of the extracted reals
};

inline WaveSample solve_exact(const ScatteringData& sd, double x, double t,
                              double cond_cap = 1e12, ExactDiagnostics* diag = nullptr) {
    ResidueSystem rs = assemble_system(sd, x, t);
    const int n = static_cast<int>(sd.poles.size());

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(rs.matrix);
    rs.cond_estimate = 1.0 / std::max(lu.rcond(), 1e-300);
    if (!(rs.cond_estimate < cond_cap))
        throw numeric_error("solve_exact: residue system condition " +
                            std::to_string(rs.cond_estimate) +
                            " exceeds cap; reduce N or mirror the Delta policy");
    const Eigen::VectorXcd sol = lu.solve(rs.rhs);
    rs.unknowns.resize(n);
    for (int j = 0; j < n; ++j) rs.unknowns[j] = sol.segment<2>(2 * j);

    Eigen::Matrix2cd sigma2;
    sigma2 << cplx(0, 0), cplx(0, -1), cplx(0, 1), cplx(0, 0);

    Eigen::Matrix2cd S0 = Eigen::Matrix2cd::Identity();
    Eigen::Matrix2cd S1 = Eigen::Matrix2cd::Zero();   // S'(0)
    Eigen::Matrix2cd Sinf = Eigen::Matrix2cd::Zero(); // coefficient of 1/z
    for (int j = 0; j < n; ++j) {
        Eigen::Matrix2cd C = Eigen::Matrix2cd::Zero();
        C.col(rs.is_delta[j] ? 1 : 0) = rs.unknowns[j];
        const Eigen::Matrix2cd M = sigma2 * C * sigma2;
        S0 -= (C + M) / rs.z[j];
        S1 += (M - C) / (rs.z[j] * rs.z[j]);
        Sinf += C - M;
    }

    // J expands in sqrt(-w) = -iz: J^{0,1} = i S'(0), J^{inf,1} = -i Sinf;
    // the diagonal Delta-Blaschke expansion factors cancel from the 12 entries
    const cplx b0_12 = (S0.inverse() * (cplx(0, 1) * S1))(0, 1);
    const cplx binf_12 = (cplx(0, -1) * Sinf)(0, 1);

    int ndelta = 0;
    for (int j = 0; j < n; ++j) ndelta += rs.is_delta[j];
    const double sgn = (ndelta % 2 == 0) ? 1.0 : -1.0;

    WaveSample ws;
    ws.x = x;
    ws.t = t;
    ws.cos_half = sgn * S0(0, 0).real();
    ws.sin_half = sgn * S0(1, 0).real();
    ws.eps_ut = (b0_12 + binf_12).real();
    ws.u_mod4pi = wrap_4pi(2.0 * std::atan2(ws.sin_half, ws.cos_half));
    if (diag) {
        diag->cond_estimate = rs.cond_estimate;
        diag->max_imag = std::max({std::abs(S0(0, 0).imag()), std::abs(S0(1, 0).imag()),
                                   std::abs((b0_12 + binf_12).imag())});
    }
    return ws;
}

// conditioning policy: empty Delta for x >= 0, full Delta ("scattering from
// the left") for x < 0
inline ScatteringData with_delta_policy(ScatteringData sd, double x) {
    apply_delta_config(sd, x >= 0 ? DeltaConfig::DeltaEmpty : DeltaConfig::NablaEmpty);
    return sd;
}

struct FieldTable {
    std::vector<double> x_grid, t_grid;
    std::vector<WaveSample> samples;  // indexed [ix * t_grid.size() + it]
    const WaveSample& at(int ix, int it) const { return samples[ix * t_grid.size() + it]; }
    WaveSample& at(int ix, int it) { return samples[ix * t_grid.size() + it]; }
};

inline FieldTable field_grid(const ScatteringData& sd, const std::vector<double>& x_grid,
                             const std::vector<double>& t_grid, double cond_cap = 1e12) {
    FieldTable table;
    table.x_grid = x_grid;
    table.t_grid = t_grid;
    table.samples.resize(x_grid.size() * t_grid.size());
    for (std::size_t ix = 0; ix < x_grid.size(); ++ix) {
        const ScatteringData local = with_delta_policy(sd, x_grid[ix]);
        double prev = 0.0;
        bool have_prev = false;
        for (std::size_t it = 0; it < t_grid.size(); ++it) {
            WaveSample& ws = table.samples[ix * t_grid.size() + it];
            try {
                ws = solve_exact(local, x_grid[ix], t_grid[it], cond_cap);
                // continuous phase along the time column
                if (have_prev)
                    ws.u_mod4pi += 4.0 * pi * std::round((prev - ws.u_mod4pi) / (4.0 * pi));
                prev = ws.u_mod4pi;
                have_prev = true;
            } catch (const std::exception& e) {
                ws.x = x_grid[ix];
                ws.t = t_grid[it];
                ws.ok = false;
                ws.error = e.what();
            }
        }
    }
    return table;
}

// |eps^2 (u_tt - u_xx) + sin u| on a centered 5-point stencil; the neighbor
// phases are re-aligned to the center sample so differences see a continuous u
inline double sine_gordon_residual(const WaveSample& c, const WaveSample& xm,
                                   const WaveSample& xp, const WaveSample& tm,
                                   const WaveSample& tp, double eps) {
    const double hx = xp.x - c.x, ht = tp.t - c.t;
    if (!(hx > 0) || !(ht > 0) || std::abs((c.x - xm.x) - hx) > 1e-12 * (1 + std::abs(hx)) ||
        std::abs((c.t - tm.t) - ht) > 1e-12 * (1 + std::abs(ht)))
        throw domain_error("sine_gordon_residual: stencil not uniform");
    const auto phase = [&](const WaveSample& s) {
        const double u = 2.0 * std::atan2(s.sin_half, s.cos_half);
        return u + 4.0 * pi * std::round((c.u_mod4pi - u) / (4.0 * pi));
    };
    const double uc = phase(c);
    const double u_xx = (phase(xp) - 2.0 * uc + phase(xm)) / (hx * hx);
    const double u_tt = (phase(tp) - 2.0 * uc + phase(tm)) / (ht * ht);
    return std::abs(eps * eps * (u_tt - u_xx) + std::sin(uc));
}

}  // namespace fluxon
