#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace qhe {

/**
 * Physical parameters of the three-level engine.
 *
 * Bare level energies omega0 < omega1 < omega2, internal coupling lambda
 * between the upper two bare levels, optional periodic drive amplitude
 * omega_drive on the work transition, and inverse temperatures of the two
 * baths. gamma_h20 / gamma_c10 are the resonant bath couplings (hot bath on
 * the eps0<->eps2 gap, cold bath on the eps0<->eps1 gap). gamma_h10 and
 * gamma_c20 allow the off-resonant couplings to be switched on; they default
 * to zero.
 */
struct EngineParams {
    double omega0 = 0.0;
    double omega1 = 1.0;
    double omega2 = 2.5;
    double lambda = 0.5;
    double omega_drive = 0.0;
    double beta_h = 1.0;
    double beta_c = 5.0;
    double gamma_h20 = 1.0;
    double gamma_c10 = 1.0;
    double gamma_h10 = 0.0;
    double gamma_c20 = 0.0;

    void validate() const {
        auto fail = [](const std::string& msg) {
            throw std::invalid_argument("EngineParams: " + msg);
        };
        for (double v : {omega0, omega1, omega2, lambda, omega_drive, beta_h, beta_c,
                         gamma_h20, gamma_c10, gamma_h10, gamma_c20})
            if (!std::isfinite(v)) fail("all fields must be finite");
        if (!(omega0 < omega1 && omega1 < omega2))
            fail("level ordering omega0 < omega1 < omega2 required");
        if (lambda < 0.0) fail("lambda must be non-negative");
        if (beta_h <= 0.0 || beta_c <= 0.0) fail("inverse temperatures must be positive");
        if (gamma_h20 < 0.0 || gamma_c10 < 0.0 || gamma_h10 < 0.0 || gamma_c20 < 0.0)
            fail("bath couplings must be non-negative");
        if (gamma_h20 + gamma_c10 + gamma_h10 + gamma_c20 <= 0.0)
            fail("at least one bath coupling must be positive");
    }
};

/**
 * Quantities derived from EngineParams for one circuit time step dt.
 *
 * Energies and rates follow the dressed-basis reduction: eps20/eps10 are the
 * dressed gaps, theta the mixing angle, c2 = cos^2(theta/2) the matrix-element
 * factor shared by all four rates. p_* are the bath fixed-point ground
 * probabilities, alpha_* the probability-qubit preparation angles and
 * theta_*d the damping rotation angles for the step.
 */
struct DerivedParams {
    double eps20 = 0.0;
    double eps10 = 0.0;
    double theta = 0.0;
    double c2 = 0.0;
    double g_hd = 0.0, g_hr = 0.0;
    double g_cd = 0.0, g_cr = 0.0;
    double p_hd = 0.0, p_cd = 0.0;
    double alpha_h = 0.0, alpha_c = 0.0;
    double theta_hd = 0.0, theta_cd = 0.0;
    double dt = 0.0;
};

inline DerivedParams derive_params(const EngineParams& p, double dt) {
    p.validate();
    if (!(dt >= 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("derive_params: dt must be non-negative and finite");

    DerivedParams d;
    d.dt = dt;
    const double mean = 0.5 * (p.omega2 + p.omega1) - p.omega0;
    const double half = 0.5 * (p.omega2 - p.omega1);
    const double root = std::sqrt(half * half + p.lambda * p.lambda);
    d.eps20 = mean + root;
    d.eps10 = mean - root;
    d.theta = std::atan2(2.0 * p.lambda, p.omega2 - p.omega1);
    d.c2 = 0.5 * (1.0 + std::cos(d.theta));

    d.g_hd = p.gamma_h20 * d.c2;
    d.g_hr = d.g_hd * std::exp(-p.beta_h * d.eps20);
    d.g_cd = p.gamma_c10 * d.c2;
    d.g_cr = d.g_cd * std::exp(-p.beta_c * d.eps10);

    // A switched-off bath (rate sum zero) acts as the identity channel; the
    // fixed point is then immaterial and p = 1 keeps the angles well defined.
    d.p_hd = (d.g_hd + d.g_hr > 0.0) ? d.g_hd / (d.g_hd + d.g_hr) : 1.0;
    d.p_cd = (d.g_cd + d.g_cr > 0.0) ? d.g_cd / (d.g_cd + d.g_cr) : 1.0;
    d.alpha_h = 2.0 * std::acos(std::sqrt(d.p_hd));
    d.alpha_c = 2.0 * std::acos(std::sqrt(d.p_cd));
    d.theta_hd = std::acos(std::exp(-0.5 * dt * (d.g_hd + d.g_hr)));
    d.theta_cd = std::acos(std::exp(-0.5 * dt * (d.g_cd + d.g_cr)));
    return d;
}

} // namespace qhe
