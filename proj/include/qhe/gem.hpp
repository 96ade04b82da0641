#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gate.hpp"
#include "sampling.hpp"

namespace qhe {

/**
 * Response matrix of the half-circuit calibration protocol. Column j of
 * m1/m2 is the observed distribution when basis state j is prepared and the
 * corresponding calibration circuit is run; m_q = (m1 + m2)/2.
 */
struct CalibrationMatrix {
    Eigen::Matrix4d m_q = Eigen::Matrix4d::Identity();
    Eigen::Matrix4d m1 = Eigen::Matrix4d::Identity();
    Eigen::Matrix4d m2 = Eigen::Matrix4d::Identity();
    long shots = 0; // per column; 0 marks exact-evolution mode
    std::uint64_t seed = 0;

    void validate() const {
        for (const Eigen::Matrix4d* m : {&m_q, &m1, &m2}) {
            if (!m->allFinite()) throw std::invalid_argument("CalibrationMatrix: non-finite");
            if (m->minCoeff() < -1e-12 || m->maxCoeff() > 1.0 + 1e-12)
                throw std::invalid_argument("CalibrationMatrix: entries outside [0,1]");
            const double tol = shots > 0 ? 2e-2 : 1e-10;
            for (int j = 0; j < 4; ++j)
                if (std::abs(m->col(j).sum() - 1.0) > tol)
                    throw std::invalid_argument("CalibrationMatrix: column sums off 1");
        }
    }
};

struct MitigationResult {
    Eigen::Vector4d v = Eigen::Vector4d::Zero();
    Eigen::Vector4d x = Eigen::Vector4d::Zero();
    double residual = 0.0;      // value of f(x) = |v - m_q x|^2
    int iterations = 0;         // candidate supports examined
    double kkt_residual = 0.0;  // projected-gradient norm at x
};

/// Evaluate one calibration circuit: return the observed distribution over
/// {00,01,10,11} using `shots` samples, or the exact distribution when
/// shots = 0. Must be deterministic in seed.
using CircuitEval =
    std::function<Eigen::Vector4d(const Circuit& circuit, long shots, std::uint64_t seed)>;

/// X gates preparing computational basis state j of the system qubits
/// (j's high bit drives the first system qubit).
inline std::vector<GateOp> system_basis_prep(const Circuit& c, int j) {
    if (j < 0 || j > 3) throw std::invalid_argument("system_basis_prep: j in 0..3");
    std::vector<GateOp> ops;
    if (j & 2) ops.push_back(GateOp::x(c.system_qubits[0]));
    if (j & 1) ops.push_back(GateOp::x(c.system_qubits[1]));
    return ops;
}

/**
 * Build the calibration matrix by preparing each system basis state once per
 * calibration circuit. Column seeds derive from the given seed, so the
 * result is a pure function of (circuits, shots, seed).
 */
inline CalibrationMatrix build_calibration_matrix(const CircuitEval& eval, const Circuit& c1,
                                                  const Circuit& c2, long shots,
                                                  std::uint64_t seed) {
    if (shots < 0) throw std::invalid_argument("build_calibration_matrix: shots >= 0");
    CalibrationMatrix cm;
    cm.shots = shots;
    cm.seed = seed;
    const std::array<const Circuit*, 2> circuits = {&c1, &c2};
    std::array<Eigen::Matrix4d*, 2> targets = {&cm.m1, &cm.m2};
    for (int c = 0; c < 2; ++c) {
        for (int j = 0; j < 4; ++j) {
            Circuit prepped = *circuits[c];
            const auto prep = system_basis_prep(prepped, j);
            prepped.ops.insert(prepped.ops.begin(), prep.begin(), prep.end());
            targets[c]->col(j) =
                eval(prepped, shots, derive_seed(seed, {static_cast<std::uint64_t>(c + 1),
                                                        static_cast<std::uint64_t>(j)}));
        }
    }
    cm.m_q = 0.5 * (cm.m1 + cm.m2);
    cm.validate();
    return cm;
}

namespace detail {

/// Euclidean projection onto the probability simplex.
inline Eigen::Vector4d project_simplex(const Eigen::Vector4d& y) {
    std::array<double, 4> u = {y(0), y(1), y(2), y(3)};
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, tau = 0.0;
    for (int i = 0; i < 4; ++i) {
        css += u[i];
        const double t = (css - 1.0) / (i + 1);
        if (u[i] - t > 0.0) tau = t;
    }
    Eigen::Vector4d x;
    for (int i = 0; i < 4; ++i) x(i) = std::max(y(i) - tau, 0.0);
    return x;
}

inline double objective(const Eigen::Matrix4d& m, const Eigen::Vector4d& v,
                        const Eigen::Vector4d& x) {
    return (v - m * x).squaredNorm();
}

inline double kkt_norm(const Eigen::Matrix4d& m, const Eigen::Vector4d& v,
                       const Eigen::Vector4d& x) {
    const Eigen::Vector4d g = 2.0 * m.transpose() * (m * x - v);
    double lambda = 0.0;
    int active = 0;
    for (int i = 0; i < 4; ++i)
        if (x(i) > 1e-12) {
            lambda += g(i);
            ++active;
        }
    if (active == 0) return g.cwiseAbs().maxCoeff();
    lambda /= active;
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) {
        if (x(i) > 1e-12) worst = std::max(worst, std::abs(g(i) - lambda));
        else worst = std::max(worst, std::max(0.0, lambda - g(i)));
    }
    return worst;
}

} // namespace detail

/**
 * argmin |v - m_q x|^2 over the probability simplex. Active-set search by
 * support enumeration: for each of the 15 candidate supports the equality-
 * constrained minimizer comes from its KKT system; the best feasible
 * candidate is polished by projected gradient. Exact for full-rank m_q and
 * convergent (never erroring) for singular ones.
 */
inline MitigationResult mitigate(const Eigen::Vector4d& v, const CalibrationMatrix& cal) {
    if (!v.allFinite()) throw std::invalid_argument("mitigate: non-finite raw distribution");
    cal.validate();
    if (v.minCoeff() < -1e-9 || std::abs(v.sum() - 1.0) > 1e-6)
        throw std::invalid_argument("mitigate: v must be a probability vector");
    const Eigen::Matrix4d& m = cal.m_q;

    MitigationResult res;
    res.v = v;
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector4d best_x = Eigen::Vector4d::Constant(0.25);

    for (unsigned mask = 1; mask < 16; ++mask) {
        std::vector<int> sup;
        for (int i = 0; i < 4; ++i)
            if (mask & (1u << i)) sup.push_back(i);
        const int k = static_cast<int>(sup.size());

        Eigen::MatrixXd a(4, k);
        for (int c = 0; c < k; ++c) a.col(c) = m.col(sup[c]);
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
        kkt.topLeftCorner(k, k) = 2.0 * a.transpose() * a;
        kkt.topRightCorner(k, 1).setOnes();
        kkt.bottomLeftCorner(1, k).setOnes();
        Eigen::VectorXd rhs(k + 1);
        rhs.head(k) = 2.0 * a.transpose() * v;
        rhs(k) = 1.0;

        const Eigen::VectorXd sol =
            kkt.completeOrthogonalDecomposition().solve(rhs);
        ++res.iterations;

        bool feasible = true;
        for (int c = 0; c < k; ++c)
            if (sol(c) < -1e-10) feasible = false;
        if (!feasible) continue;

        Eigen::Vector4d x = Eigen::Vector4d::Zero();
        for (int c = 0; c < k; ++c) x(sup[c]) = std::max(sol(c), 0.0);
        const double sum = x.sum();
        if (sum <= 0.0) continue;
        x /= sum;
        const double f = detail::objective(m, v, x);
        if (f < best) {
            best = f;
            best_x = x;
        }
    }

    // projected-gradient polish; a no-op for the regular full-rank case
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> hess(m.transpose() * m,
                                                        Eigen::EigenvaluesOnly);
    const double lip = 2.0 * hess.eigenvalues().maxCoeff();
    if (lip > 0.0) {
        const double step = 1.0 / lip;
        Eigen::Vector4d x = best_x;
        for (int it = 0; it < 2000; ++it) {
            if (detail::kkt_norm(m, v, x) <= 1e-12) break;
            x = detail::project_simplex(x - step * 2.0 * m.transpose() * (m * x - v));
        }
        if (detail::objective(m, v, x) <= best) {
            best = detail::objective(m, v, x);
            best_x = x;
        }
    }

    res.x = best_x;
    res.residual = best;
    res.kkt_residual = detail::kkt_norm(m, v, best_x);
    return res;
}

/// L1/L2 distances of raw and calibrated distributions to a reference, plus
/// the signed improvements (positive = calibration helped).
struct ImprovementReport {
    double l1_raw = 0.0, l1_calibrated = 0.0;
    double l2_raw = 0.0, l2_calibrated = 0.0;
    double l1_improvement = 0.0, l2_improvement = 0.0;
};

inline ImprovementReport improvement_report(const Eigen::VectorXd& raw,
                                            const Eigen::VectorXd& calibrated,
                                            const Eigen::VectorXd& reference) {
    if (raw.size() != reference.size() || calibrated.size() != reference.size())
        throw std::invalid_argument("improvement_report: dimension mismatch");
    ImprovementReport r;
    r.l1_raw = (raw - reference).lpNorm<1>();
    r.l1_calibrated = (calibrated - reference).lpNorm<1>();
    r.l2_raw = (raw - reference).norm();
    r.l2_calibrated = (calibrated - reference).norm();
    r.l1_improvement = r.l1_raw - r.l1_calibrated;
    r.l2_improvement = r.l2_raw - r.l2_calibrated;
    return r;
}

inline nlohmann::json to_json(const CalibrationMatrix& cm) {
    auto rows = [](const Eigen::Matrix4d& m) {
        nlohmann::json out = nlohmann::json::array();
        for (int i = 0; i < 4; ++i) out.push_back({m(i, 0), m(i, 1), m(i, 2), m(i, 3)});
        return out;
    };
    nlohmann::json j;
    j["m_q"] = rows(cm.m_q);
    j["m1"] = rows(cm.m1);
    j["m2"] = rows(cm.m2);
    j["labels"] = basis_labels();
    j["shots"] = cm.shots;
    j["seed"] = cm.seed;
    return j;
}

inline CalibrationMatrix calibration_from_json(const nlohmann::json& j) {
    auto matrix = [&](const nlohmann::json& rows) {
        Eigen::Matrix4d m;
        for (int i = 0; i < 4; ++i)
            for (int c = 0; c < 4; ++c) m(i, c) = rows.at(i).at(c).get<double>();
        return m;
    };
    CalibrationMatrix cm;
    cm.m_q = matrix(j.at("m_q"));
    if (j.contains("m1")) cm.m1 = matrix(j.at("m1"));
    if (j.contains("m2")) cm.m2 = matrix(j.at("m2"));
    cm.shots = j.value("shots", 0L);
    cm.seed = j.value("seed", std::uint64_t{0});
    return cm;
}

inline nlohmann::json to_json(const MitigationResult& r) {
    nlohmann::json j;
    j["v"] = {r.v(0), r.v(1), r.v(2), r.v(3)};
    j["x"] = {r.x(0), r.x(1), r.x(2), r.x(3)};
    j["residual"] = r.residual;
    j["iterations"] = r.iterations;
    j["kkt_residual"] = r.kkt_residual;
    return j;
}

} // namespace qhe
