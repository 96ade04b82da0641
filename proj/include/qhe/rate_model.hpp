#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>

#include "params.hpp"
#include "trace.hpp"

namespace qhe {

namespace detail {

struct EdgeRates {
    double down = 0.0; // toward eps0
    double up = 0.0;   // away from eps0
};

// Star graph around eps0. Each bath contributes to both edges; the
// off-resonant matrix element carries sin^2(theta/2).
inline std::pair<EdgeRates, EdgeRates> star_rates(const EngineParams& p) {
    const DerivedParams d = derive_params(p, 1.0);
    const double s2 = 1.0 - d.c2;
    EdgeRates e1, e2; // eps0<->eps1, eps0<->eps2
    e1.down = p.gamma_c10 * d.c2 + p.gamma_h10 * s2;
    e1.up = p.gamma_c10 * d.c2 * std::exp(-p.beta_c * d.eps10) +
            p.gamma_h10 * s2 * std::exp(-p.beta_h * d.eps10);
    e2.down = p.gamma_h20 * d.c2 + p.gamma_c20 * s2;
    e2.up = p.gamma_h20 * d.c2 * std::exp(-p.beta_h * d.eps20) +
            p.gamma_c20 * s2 * std::exp(-p.beta_c * d.eps20);
    return {e1, e2};
}

inline void check_grid(std::span<const double> grid) {
    if (grid.empty()) throw std::invalid_argument("time grid must be non-empty");
    double prev = -1.0;
    for (double t : grid) {
        if (!std::isfinite(t) || t < 0.0)
            throw std::invalid_argument("time grid must be finite and non-negative");
        if (t <= prev) throw std::invalid_argument("time grid must be strictly increasing");
        prev = t;
    }
}

} // namespace detail

/**
 * Generator of the population rate equation, d(rho_diag)/dt = G rho_diag,
 * with rho_diag = (rho00, rho11, rho22) in the dressed basis.
 */
inline Eigen::Matrix3d rate_generator(const EngineParams& p) {
    auto [e1, e2] = detail::star_rates(p);
    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
    g(0, 1) = e1.down;
    g(1, 0) = e1.up;
    g(0, 2) = e2.down;
    g(2, 0) = e2.up;
    g(0, 0) = -(e1.up + e2.up);
    g(1, 1) = -e1.down;
    g(2, 2) = -e2.down;
    return g;
}

/**
 * Stationary populations of rate_generator. The chain is a star around eps0
 * and therefore reversible; the fixed point follows from the edge ratios.
 * Throws if either excited state is disconnected from eps0.
 */
inline Eigen::Vector3d steady_state(const EngineParams& p) {
    auto [e1, e2] = detail::star_rates(p);
    if (e1.down <= 0.0 || e2.down <= 0.0)
        throw std::domain_error("steady_state: rate graph is disconnected");
    const double r1 = e1.up / e1.down;
    const double r2 = e2.up / e2.down;
    const double z = 1.0 + r1 + r2;
    return Eigen::Vector3d(1.0 / z, r1 / z, r2 / z);
}

/**
 * Integrate the simplified population model over a strictly increasing time
 * grid starting from rho0 at t = 0. Uses the exact matrix exponential via
 * symmetrized eigendecomposition; falls back to fixed-step RK4 when the
 * symmetrization is unavailable (a disconnected edge).
 */
inline PopulationTrace integrate_simplified(const EngineParams& p,
                                            const Eigen::Vector3d& rho0,
                                            std::span<const double> grid) {
    p.validate();
    detail::check_grid(grid);
    if ((rho0.array() < -1e-12).any() || std::abs(rho0.sum() - 1.0) > 1e-10)
        throw std::invalid_argument("integrate_simplified: rho0 must be a probability vector");

    const Eigen::Matrix3d g = rate_generator(p);
    PopulationTrace trace;
    trace.samples.reserve(grid.size());
    auto emit = [&](double t, const Eigen::Vector3d& v) {
        trace.samples.push_back({t, v(0), v(1), v(2), 0.0, Source::Theory, 0, 0});
    };

    bool symmetrizable = true;
    Eigen::Vector3d pi = Eigen::Vector3d::Zero();
    try {
        pi = steady_state(p);
    } catch (const std::domain_error&) {
        symmetrizable = false;
    }

    if (symmetrizable) {
        // Detailed balance makes D^{-1/2} G D^{1/2} symmetric, D = diag(pi).
        const Eigen::Vector3d dh = pi.array().sqrt();
        Eigen::Matrix3d s = dh.cwiseInverse().asDiagonal() * g * dh.asDiagonal();
        s = 0.5 * (s + s.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(s);
        const Eigen::Matrix3d u = es.eigenvectors();
        const Eigen::Vector3d w = es.eigenvalues();
        const Eigen::Vector3d y = u.transpose() * (dh.cwiseInverse().asDiagonal() * rho0);
        for (double t : grid) {
            const Eigen::Vector3d z = (w.array() * t).exp() * y.array();
            emit(t, dh.asDiagonal() * (u * z));
        }
        return trace;
    }

    const double h_max = 0.005;
    Eigen::Vector3d v = rho0;
    double t = 0.0;
    for (double tk : grid) {
        const double span = tk - t;
        const int n = span > 0.0 ? static_cast<int>(std::ceil(span / h_max)) : 0;
        const double h = n > 0 ? span / n : 0.0;
        for (int i = 0; i < n; ++i) {
            const Eigen::Vector3d k1 = g * v;
            const Eigen::Vector3d k2 = g * (v + 0.5 * h * k1);
            const Eigen::Vector3d k3 = g * (v + 0.5 * h * k2);
            const Eigen::Vector3d k4 = g * (v + h * k3);
            v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t = tk;
        emit(t, v);
    }
    return trace;
}

} // namespace qhe
