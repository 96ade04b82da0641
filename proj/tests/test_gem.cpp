#include <catch_amalgamated.hpp>

#include <qhe/engine_circuit.hpp>
#include <qhe/gem.hpp>
#include <qhe/noise.hpp>
#include <qhe/register.hpp>
#include <qhe/sampling.hpp>

#include "oracles.hpp"

#include <cmath>
#include <random>

using Catch::Approx;

namespace {

qhe::CalibrationMatrix exact_matrix(const Eigen::Matrix4d& m) {
    qhe::CalibrationMatrix cm;
    cm.m_q = cm.m1 = cm.m2 = m;
    cm.shots = 0;
    cm.seed = 0;
    return cm;
}

Eigen::Vector4d random_simplex_point(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::Vector4d x;
    for (int i = 0; i < 4; ++i) x(i) = -std::log(1.0 - u(rng));
    return x / x.sum();
}

Eigen::Matrix4d random_stochastic(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Eigen::Matrix4d m;
    for (int j = 0; j < 4; ++j) {
        Eigen::Vector4d col;
        for (int i = 0; i < 4; ++i) col(i) = u(rng);
        m.col(j) = col / col.sum();
    }
    return m;
}

} // namespace

TEST_CASE("an identity response returns the input", "[gem]") {
    const qhe::CalibrationMatrix cm = exact_matrix(Eigen::Matrix4d::Identity());
    const Eigen::Vector4d v(0.7, 0.1, 0.15, 0.05);
    const qhe::MitigationResult r = qhe::mitigate(v, cm);
    CHECK((r.x - v).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(r.residual < 1e-24);
    CHECK(r.kkt_residual < 1e-10);
}

TEST_CASE("an exact interior preimage is recovered", "[gem]") {
    const Eigen::Matrix2d f = qhe::NoiseModel::flip_matrix(0.03, 0.08);
    Eigen::Matrix4d m;
    // response of the product readout channel in column convention
    for (int t0 = 0; t0 < 2; ++t0)
        for (int t1 = 0; t1 < 2; ++t1)
            for (int o0 = 0; o0 < 2; ++o0)
                for (int o1 = 0; o1 < 2; ++o1)
                    m(2 * o0 + o1, 2 * t0 + t1) = f(t0, o0) * f(t1, o1);

    const Eigen::Vector4d x_true(0.6, 0.2, 0.15, 0.05);
    const Eigen::Vector4d v = m * x_true;
    const qhe::MitigationResult r = qhe::mitigate(v, exact_matrix(m));
    CHECK((r.x - x_true).lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK(r.kkt_residual <= 1e-10);
}

TEST_CASE("infeasible targets satisfy the optimality conditions", "[gem]") {
    // v cannot be reached from the simplex through this contraction
    Eigen::Matrix4d m = Eigen::Matrix4d::Constant(0.25 * 0.6);
    m += 0.4 * Eigen::Matrix4d::Identity();
    const Eigen::Vector4d v(1.0, 0.0, 0.0, 0.0);
    const qhe::MitigationResult r = qhe::mitigate(v, exact_matrix(m));

    CHECK(r.kkt_residual <= 1e-10);
    CHECK(r.x.minCoeff() >= -1e-12);
    CHECK(r.x.sum() == Approx(1.0).margin(1e-10));
    CHECK(r.residual > 1e-3);

    // no random simplex point does better
    std::mt19937_64 rng(5);
    const double fx = (v - m * r.x).squaredNorm();
    for (int i = 0; i < 1000; ++i) {
        const Eigen::Vector4d y = random_simplex_point(rng);
        CHECK(fx <= (v - m * y).squaredNorm() + 1e-12);
    }
}

TEST_CASE("the solver matches the brute force oracle", "[gem]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> mix(0.1, 0.7);
    for (int trial = 0; trial < 25; ++trial) {
        // diagonally dominant response, like a real readout channel, so the
        // program is strictly convex and the minimizer unique
        const double w = mix(rng);
        const Eigen::Matrix4d m =
            (1.0 - w) * Eigen::Matrix4d::Identity() + w * random_stochastic(rng);
        Eigen::Vector4d v = random_simplex_point(rng);
        if (trial % 3 == 0) v = m * random_simplex_point(rng); // feasible case
        const qhe::MitigationResult r = qhe::mitigate(v, exact_matrix(m));
        const Eigen::Vector4d ref = oracle::qp_solve(m, v);
        CHECK((r.x - ref).lpNorm<Eigen::Infinity>() < 1e-6);
        CHECK((m * r.x - v).squaredNorm() <= (m * ref - v).squaredNorm() + 1e-12);
    }

    // flat instances have non-unique minimizers; the attained objective must
    // still match the oracle's
    for (int trial = 0; trial < 25; ++trial) {
        const Eigen::Matrix4d m = random_stochastic(rng);
        const Eigen::Vector4d v = random_simplex_point(rng);
        const qhe::MitigationResult r = qhe::mitigate(v, exact_matrix(m));
        const Eigen::Vector4d ref = oracle::qp_solve(m, v);
        CHECK((m * r.x - v).squaredNorm() <= (m * ref - v).squaredNorm() + 1e-10);
    }
}

TEST_CASE("singular responses are handled, never fatal", "[gem]") {
    Eigen::Matrix4d m;
    m.col(0) = Eigen::Vector4d(0.7, 0.1, 0.1, 0.1);
    m.col(1) = m.col(0); // rank deficiency
    m.col(2) = Eigen::Vector4d(0.1, 0.1, 0.7, 0.1);
    m.col(3) = Eigen::Vector4d(0.25, 0.25, 0.25, 0.25);

    const Eigen::Vector4d v = 0.5 * m.col(0) + 0.5 * m.col(2);
    const qhe::MitigationResult r = qhe::mitigate(v, exact_matrix(m));
    CHECK(r.x.minCoeff() >= -1e-12);
    CHECK(r.x.sum() == Approx(1.0).margin(1e-10));
    // the optimum is degenerate; compare objectives, not minimizers
    const double fx = (v - m * r.x).squaredNorm();
    const double fref = (v - m * oracle::qp_solve(m, v)).squaredNorm();
    CHECK(fx <= fref + 1e-10);
}

TEST_CASE("mitigate validates its inputs", "[gem]") {
    const qhe::CalibrationMatrix cm = exact_matrix(Eigen::Matrix4d::Identity());
    Eigen::Vector4d v(0.5, 0.5, 0.0, 0.0);
    v(1) = std::nan("");
    CHECK_THROWS_AS(qhe::mitigate(v, cm), std::invalid_argument);
    CHECK_THROWS_AS(qhe::mitigate(Eigen::Vector4d(0.9, 0.4, -0.3, 0.0), cm),
                    std::invalid_argument);
    CHECK_THROWS_AS(qhe::mitigate(Eigen::Vector4d(0.4, 0.4, 0.0, 0.0), cm),
                    std::invalid_argument);

    qhe::CalibrationMatrix bad = cm;
    bad.m_q(0, 0) = 1.4; // column sum off
    CHECK_THROWS_AS(qhe::mitigate(Eigen::Vector4d(1.0, 0.0, 0.0, 0.0), bad),
                    std::invalid_argument);
}

TEST_CASE("calibration matrices come from basis-prepared circuit pairs", "[gem]") {
    const qhe::EngineParams params;
    const qhe::StepPlan plan{1.0, 2, qhe::PQubitMode::ReprepareEachStep};
    const qhe::Circuit engine = qhe::build_engine_circuit(params, plan, 0);
    const auto [c1, c2] = qhe::build_calibration_circuits(engine);
    const qhe::NoiseModel noise = qhe::NoiseModel::defaults();

    const qhe::CircuitEval eval = [&](const qhe::Circuit& c, long shots,
                                      std::uint64_t seed) -> Eigen::Vector4d {
        const qhe::RegisterState s = qhe::evolve(c, qhe::RegisterState(c.n_qubits), &noise);
        const Eigen::Vector4d probs =
            qhe::apply_readout(qhe::marginal_populations(s, c.system_qubits), noise.readout);
        if (shots == 0) return probs;
        return qhe::counts_to_probs(
            qhe::sample_counts(s, c.system_qubits, shots, noise.readout, seed));
    };

    // exact evaluation: stochastic columns to machine precision
    const qhe::CalibrationMatrix exact = qhe::build_calibration_matrix(eval, c1, c2, 0, 3);
    for (int j = 0; j < 4; ++j) {
        CHECK(exact.m_q.col(j).sum() == Approx(1.0).margin(1e-12));
        CHECK(exact.m_q.col(j).minCoeff() >= 0.0);
    }
    CHECK((exact.m_q - 0.5 * (exact.m1 + exact.m2)).cwiseAbs().maxCoeff() < 1e-15);
    // noise pushes the response away from a permutation
    CHECK((exact.m_q - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() > 0.01);

    // sampled evaluation: reproducible and close to the exact response
    const qhe::CalibrationMatrix s1 = qhe::build_calibration_matrix(eval, c1, c2, 4096, 3);
    const qhe::CalibrationMatrix s2 = qhe::build_calibration_matrix(eval, c1, c2, 4096, 3);
    CHECK((s1.m_q - s2.m_q).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s1.m_q - exact.m_q).cwiseAbs().maxCoeff() < 0.05);
    s1.validate();

    CHECK_THROWS_AS(qhe::build_calibration_matrix(eval, c1, c2, -1, 3), std::invalid_argument);
}

TEST_CASE("basis preparation targets the system qubits", "[gem]") {
    qhe::Circuit c;
    c.n_qubits = 4;
    c.system_qubits = {2, 0};
    const auto prep01 = qhe::system_basis_prep(c, 0b01);
    REQUIRE(prep01.size() == 1);
    CHECK(prep01[0].kind == qhe::GateKind::X);
    CHECK(prep01[0].target == 0); // second system qubit carries the low bit
    CHECK(qhe::system_basis_prep(c, 0b10).at(0).target == 2);
    CHECK(qhe::system_basis_prep(c, 0b11).size() == 2);
    CHECK(qhe::system_basis_prep(c, 0).empty());
    CHECK_THROWS_AS(qhe::system_basis_prep(c, 4), std::invalid_argument);
}

TEST_CASE("mitigation JSON carries the full calibration record", "[gem]") {
    qhe::CalibrationMatrix cm = exact_matrix(Eigen::Matrix4d::Identity());
    cm.shots = 512;
    cm.seed = 77;
    const nlohmann::json j = qhe::to_json(cm);
    CHECK(j.at("labels") == nlohmann::json({"00", "01", "10", "11"}));
    CHECK(j.at("shots") == 512);
    CHECK(j.at("seed") == 77);
    const qhe::CalibrationMatrix back = qhe::calibration_from_json(j);
    CHECK((back.m_q - cm.m_q).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.shots == cm.shots);
    CHECK(back.seed == cm.seed);

    const qhe::MitigationResult r = qhe::mitigate(Eigen::Vector4d(0.7, 0.1, 0.1, 0.1), cm);
    const nlohmann::json rj = qhe::to_json(r);
    CHECK(rj.at("x").size() == 4);
    CHECK(rj.at("v").size() == 4);
    CHECK(rj.contains("residual"));
    CHECK(rj.contains("kkt_residual"));
}

TEST_CASE("improvement reports summarize distance changes", "[gem]") {
    Eigen::VectorXd reference(4), raw(4), mitigated(4);
    reference << 0.7, 0.1, 0.15, 0.05;
    raw << 0.6, 0.15, 0.2, 0.05;
    mitigated << 0.68, 0.11, 0.16, 0.05;
    const qhe::ImprovementReport rep = qhe::improvement_report(raw, mitigated, reference);
    CHECK(rep.l1_raw == Approx(0.2).margin(1e-12));
    CHECK(rep.l1_calibrated == Approx(0.04).margin(1e-12));
    CHECK(rep.l1_improvement == Approx(0.16).margin(1e-12));
    CHECK(rep.l2_improvement > 0.0);

    Eigen::VectorXd short_vec(3);
    short_vec << 0.1, 0.1, 0.1;
    CHECK_THROWS_AS(qhe::improvement_report(raw, mitigated, short_vec), std::invalid_argument);
}
