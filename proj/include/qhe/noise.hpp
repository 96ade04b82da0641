#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace qhe {

/**
 * Synthetic circuit noise: depolarizing after gates (p_dep1 for 1-qubit ops,
 * p_dep2 jointly for wider ones), per-layer amplitude damping p_relax on
 * every qubit, and a row-stochastic 2x2 readout confusion matrix per measured
 * qubit (entry (i,j) = probability of observing j given true i). An empty
 * readout list means ideal readout.
 */
struct NoiseModel {
    double p_dep1 = 0.0;
    double p_dep2 = 0.0;
    double p_relax = 0.0;
    std::vector<Eigen::Matrix2d> readout;

    void validate() const {
        for (double p : {p_dep1, p_dep2, p_relax})
            if (!(p >= 0.0 && p <= 1.0))
                throw std::invalid_argument("NoiseModel: probabilities must lie in [0,1]");
        for (const auto& r : readout) {
            for (int i = 0; i < 2; ++i) {
                if (r(i, 0) < 0.0 || r(i, 1) < 0.0)
                    throw std::invalid_argument("NoiseModel: confusion entries must be >= 0");
                if (std::abs(r.row(i).sum() - 1.0) > 1e-12)
                    throw std::invalid_argument("NoiseModel: confusion rows must sum to 1");
            }
        }
    }

    static Eigen::Matrix2d flip_matrix(double p01, double p10) {
        Eigen::Matrix2d r;
        r << 1.0 - p01, p01, p10, 1.0 - p10;
        return r;
    }

    /// Default synthetic model for the two measured qubits.
    static NoiseModel defaults() {
        NoiseModel m;
        m.p_dep1 = 0.001;
        m.p_dep2 = 0.01;
        m.p_relax = 0.005;
        m.readout = {flip_matrix(0.02, 0.02), flip_matrix(0.02, 0.02)};
        return m;
    }

    /// Readout confusion only, everything else ideal.
    static NoiseModel readout_only(double flip) {
        NoiseModel m;
        m.readout = {flip_matrix(flip, flip), flip_matrix(flip, flip)};
        return m;
    }
};

inline nlohmann::json to_json(const NoiseModel& m) {
    nlohmann::json j;
    j["p_dep1"] = m.p_dep1;
    j["p_dep2"] = m.p_dep2;
    j["p_relax"] = m.p_relax;
    nlohmann::json ro = nlohmann::json::array();
    for (const auto& r : m.readout)
        ro.push_back({{r(0, 0), r(0, 1)}, {r(1, 0), r(1, 1)}});
    j["readout"] = ro;
    return j;
}

inline NoiseModel noise_from_json(const nlohmann::json& j) {
    NoiseModel m;
    m.p_dep1 = j.value("p_dep1", 0.0);
    m.p_dep2 = j.value("p_dep2", 0.0);
    m.p_relax = j.value("p_relax", 0.0);
    if (j.contains("readout")) {
        for (const auto& rj : j.at("readout")) {
            Eigen::Matrix2d r;
            r << rj.at(0).at(0).get<double>(), rj.at(0).at(1).get<double>(),
                rj.at(1).at(0).get<double>(), rj.at(1).at(1).get<double>();
            m.readout.push_back(r);
        }
    }
    m.validate();
    return m;
}

} // namespace qhe
