#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "params.hpp"
#include "rate_model.hpp"
#include "trace.hpp"

namespace qhe {

using DensityMatrix3 = Eigen::Matrix3cd;

/// Validate the DensityMatrix3 invariants: Hermitian within 1e-12, unit trace
/// within 1e-10, smallest eigenvalue >= -1e-9.
inline void check_density3(const DensityMatrix3& rho) {
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("DensityMatrix3: not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > 1e-10 || std::abs(rho.trace().imag()) > 1e-10)
        throw std::invalid_argument("DensityMatrix3: trace must be 1");
    Eigen::SelfAdjointEigenSolver<DensityMatrix3> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-9)
        throw std::invalid_argument("DensityMatrix3: negative eigenvalue");
}

/// Off-diagonal entries of the dressed-basis density matrix at one time.
struct CoherenceSample {
    double t = 0.0;
    std::complex<double> rho01{0.0, 0.0};
    std::complex<double> rho02{0.0, 0.0};
    std::complex<double> rho12{0.0, 0.0};
};

struct FullTrajectory {
    PopulationTrace populations;
    std::vector<CoherenceSample> coherences;
};

namespace detail {

// Basis change from bare to dressed states; columns are |eps_i> expanded in
// the bare basis.
inline Eigen::Matrix3d dressing_matrix(const DerivedParams& d) {
    const double c = std::cos(0.5 * d.theta);
    const double s = std::sin(0.5 * d.theta);
    Eigen::Matrix3d v;
    v << 1.0, 0.0, 0.0,
         0.0, c, s,
         0.0, -s, c;
    return v;
}

} // namespace detail

/**
 * Integrate the full master equation
 *
 *   drho/dt = -i [H(t), rho] + sum_k g_k D[L_k] rho
 *
 * in the dressed basis of the static Hamiltonian. The four jump operators
 * are |eps0><eps2|, |eps2><eps0|, |eps0><eps1|, |eps1><eps0| with the derived
 * rates g_hd, g_hr, g_cd, g_cr; the drive replaces the static coupling
 * lambda by lambda*exp(i*omega_drive*t) on the bare (1,2) element, so
 * omega_drive = 0 makes H time independent and diagonal. rho0 is the state
 * at t = 0 in the dressed basis. Fixed-step RK4 with step <= max_step.
 */
inline FullTrajectory integrate_full(const EngineParams& p, const DensityMatrix3& rho0,
                                     std::span<const double> grid, double max_step = 0.005) {
    p.validate();
    detail::check_grid(grid);
    check_density3(rho0);
    if (!(max_step > 0.0) || max_step > 0.01)
        throw std::invalid_argument("integrate_full: max_step must lie in (0, 0.01]");

    const DerivedParams d = derive_params(p, 1.0);
    const Eigen::Matrix3d v = detail::dressing_matrix(d);
    const std::complex<double> i1(0.0, 1.0);

    const Eigen::Vector3d diag(0.0, d.eps10, d.eps20);
    // Bare-basis drive deviation from the static coupling, rotated once into
    // the dressed basis: H(t) = diag + lam*((e^{iwt}-1) A + h.c. part).
    Eigen::Matrix3cd e12 = Eigen::Matrix3cd::Zero();
    e12(1, 2) = 1.0;
    const Eigen::Matrix3cd a_drive = v.transpose() * e12 * v;

    auto hamiltonian = [&](double t) -> Eigen::Matrix3cd {
        Eigen::Matrix3cd h = diag.cast<std::complex<double>>().asDiagonal();
        if (p.omega_drive != 0.0) {
            const std::complex<double> phase = std::exp(i1 * (p.omega_drive * t)) - 1.0;
            h += p.lambda * (phase * a_drive + std::conj(phase) * a_drive.adjoint());
        }
        return h;
    };

    struct Jump {
        int from, to;
        double rate;
    };
    const std::vector<Jump> jumps = {{2, 0, d.g_hd}, {0, 2, d.g_hr}, {1, 0, d.g_cd}, {0, 1, d.g_cr}};

    auto rhs = [&](double t, const Eigen::Matrix3cd& rho) -> Eigen::Matrix3cd {
        const Eigen::Matrix3cd h = hamiltonian(t);
        Eigen::Matrix3cd out = -i1 * (h * rho - rho * h);
        for (const auto& j : jumps) {
            if (j.rate == 0.0) continue;
            // L = |to><from| acts on single entries; D[L] in components.
            const std::complex<double> pop = rho(j.from, j.from);
            out(j.to, j.to) += j.rate * pop;
            out(j.from, j.from) -= j.rate * pop;
            for (int k = 0; k < 3; ++k) {
                if (k == j.from) continue;
                out(j.from, k) -= 0.5 * j.rate * rho(j.from, k);
                out(k, j.from) -= 0.5 * j.rate * rho(k, j.from);
            }
        }
        return out;
    };

    FullTrajectory traj;
    traj.populations.samples.reserve(grid.size());
    traj.coherences.reserve(grid.size());
    const Source tag = p.omega_drive > 0.0 ? Source::TheoryFull : Source::Theory;
    auto emit = [&](double t, const Eigen::Matrix3cd& rho) {
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
            throw std::runtime_error("integrate_full: non-Hermitian drift");
        traj.populations.samples.push_back({t, rho(0, 0).real(), rho(1, 1).real(),
                                            rho(2, 2).real(), 0.0, tag, 0, 0});
        traj.coherences.push_back({t, rho(0, 1), rho(0, 2), rho(1, 2)});
    };

    Eigen::Matrix3cd rho = rho0;
    double t = 0.0;
    for (double tk : grid) {
        const double span = tk - t;
        if (span > 0.0) {
            const double steps = std::ceil(span / max_step);
            if (steps > 1e9) throw std::runtime_error("integrate_full: step-size underflow");
            const int n = static_cast<int>(steps);
            const double h = span / n;
            for (int i = 0; i < n; ++i) {
                const double ti = t + i * h;
                const Eigen::Matrix3cd k1 = rhs(ti, rho);
                const Eigen::Matrix3cd k2 = rhs(ti + 0.5 * h, rho + 0.5 * h * k1);
                const Eigen::Matrix3cd k3 = rhs(ti + 0.5 * h, rho + 0.5 * h * k2);
                const Eigen::Matrix3cd k4 = rhs(ti + h, rho + h * k3);
                rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        t = tk;
        emit(t, rho);
    }
    return traj;
}

} // namespace qhe
