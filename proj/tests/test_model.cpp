#include <catch_amalgamated.hpp>

#include <qhe/lindblad.hpp>
#include <qhe/params.hpp>
#include <qhe/rate_model.hpp>
#include <qhe/trace.hpp>

#include "oracles.hpp"

#include <cmath>
#include <sstream>

using Catch::Approx;

namespace {

qhe::EngineParams default_params() { return {}; }

Eigen::Vector3d populations_at(const qhe::PopulationTrace& trace, std::size_t i) {
    const auto& s = trace.samples.at(i);
    return {s.rho00, s.rho11, s.rho22};
}

} // namespace

TEST_CASE("derived parameters match values frozen from the definitions", "[model]") {
    // high precision evaluation of the parameter chain, default engine, dt = 0.5
    const qhe::DerivedParams d = qhe::derive_params(default_params(), 0.5);

    CHECK(d.eps20 == Approx(2.65138781886599732).margin(1e-12));
    CHECK(d.eps10 == Approx(0.848612181134002677).margin(1e-12));
    CHECK(d.theta == Approx(0.588002603547567551).margin(1e-12));
    CHECK(d.c2 == Approx(0.916025147168921842).margin(1e-12));
    CHECK(d.g_hd == Approx(0.916025147168921842).margin(1e-12));
    CHECK(d.g_hr == Approx(0.0646285328767241912).margin(1e-12));
    CHECK(d.g_cd == Approx(0.916025147168921842).margin(1e-12));
    CHECK(d.g_cr == Approx(0.0131573812359762546).margin(1e-12));
    CHECK(d.p_hd == Approx(0.934096476470963779).margin(1e-12));
    CHECK(d.p_cd == Approx(0.985839831428424331).margin(1e-12));
    CHECK(d.alpha_h == Approx(0.519247264825622361).margin(1e-12));
    CHECK(d.alpha_c == Approx(0.238558292766498037).margin(1e-12));
    CHECK(d.theta_hd == Approx(0.672002390130569869).margin(1e-12));
    CHECK(d.theta_cd == Approx(0.655551694500061748).margin(1e-12));
}

TEST_CASE("derived parameters track the independent long double chain", "[model]") {
    const qhe::EngineParams p{0.0, 0.7, 3.1, 0.9, 0.0, 0.8, 4.0, 1.3, 0.6, 0.0, 0.0};
    const qhe::DerivedParams d = qhe::derive_params(p, 0.37);
    const oracle::Chain c = oracle::chain(0.7L, 3.1L, 0.9L, 0.8L, 4.0L, 1.3L, 0.6L);

    CHECK(d.eps20 == Approx(static_cast<double>(c.eps20)).margin(1e-14));
    CHECK(d.eps10 == Approx(static_cast<double>(c.eps10)).margin(1e-14));
    CHECK(d.c2 == Approx(static_cast<double>(c.c2)).margin(1e-14));
    CHECK(d.g_hr == Approx(static_cast<double>(c.g_hr)).margin(1e-14));
    CHECK(d.g_cr == Approx(static_cast<double>(c.g_cr)).margin(1e-14));
    CHECK(d.alpha_h == Approx(static_cast<double>(c.alpha_h)).margin(1e-13));
    CHECK(d.alpha_c == Approx(static_cast<double>(c.alpha_c)).margin(1e-13));
    CHECK(d.theta_hd ==
          Approx(static_cast<double>(oracle::mixing_angle(c.g_hd, c.g_hr, 0.37L))).margin(1e-13));
    CHECK(d.theta_cd ==
          Approx(static_cast<double>(oracle::mixing_angle(c.g_cd, c.g_cr, 0.37L))).margin(1e-13));
}

TEST_CASE("parameter validation rejects bad inputs", "[model]") {
    qhe::EngineParams p;
    p.omega2 = 0.5; // below omega1
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.beta_c = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    p.gamma_h20 = p.gamma_c10 = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = {};
    CHECK_THROWS_AS(qhe::derive_params(p, -0.1), std::invalid_argument);
}

TEST_CASE("steady state equals the Boltzmann populations", "[model]") {
    const qhe::EngineParams p = default_params();
    const Eigen::Vector3d ss = qhe::steady_state(p);

    CHECK(ss(0) == Approx(0.921729675646407624).margin(1e-12));
    CHECK(ss(1) == Approx(0.0132393185672621201).margin(1e-12));
    CHECK(ss(2) == Approx(0.0650310057863302556).margin(1e-12));

    const oracle::Chain c = oracle::chain(1.0L, 2.5L, 0.5L, 1.0L, 5.0L, 1.0L, 1.0L);
    const Eigen::Vector3d ref = oracle::boltzmann_steady(c.eps10, c.eps20, 5.0L, 1.0L);
    CHECK((ss - ref).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("steady state requires both relaxation edges", "[model]") {
    qhe::EngineParams p = default_params();
    p.gamma_c10 = 0.0;
    CHECK_THROWS_AS(qhe::steady_state(p), std::domain_error);
}

TEST_CASE("rate generator columns are conservative", "[model]") {
    qhe::EngineParams p = default_params();
    p.gamma_h10 = 0.3;
    p.gamma_c20 = 0.2;
    const Eigen::Matrix3d g = qhe::rate_generator(p);
    for (int j = 0; j < 3; ++j) {
        CHECK(g.col(j).sum() == Approx(0.0).margin(1e-15));
        for (int i = 0; i < 3; ++i)
            if (i != j) CHECK(g(i, j) >= 0.0);
    }
}

TEST_CASE("simplified model matches an independent matrix exponential", "[model]") {
    const qhe::EngineParams p = default_params();
    const oracle::Chain c = oracle::chain(1.0L, 2.5L, 0.5L, 1.0L, 5.0L, 1.0L, 1.0L);
    const Eigen::Matrix3d g = oracle::rate_generator(
        1.0, 1.0, 0.0, 0.0, static_cast<double>(c.c2), static_cast<double>(c.eps10),
        static_cast<double>(c.eps20), 1.0, 5.0);

    const std::vector<double> grid = {0.0, 0.17, 0.5, 1.0, 2.31, 5.0, 11.0};
    for (int init = 0; init < 3; ++init) {
        Eigen::Vector3d rho0 = Eigen::Vector3d::Zero();
        rho0(init) = 1.0;
        const qhe::PopulationTrace trace = qhe::integrate_simplified(p, rho0, grid);
        REQUIRE(trace.samples.size() == grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Eigen::Vector3d ref = oracle::propagate(g, rho0, grid[i]);
            CHECK((populations_at(trace, i) - ref).lpNorm<Eigen::Infinity>() < 1e-9);
            CHECK(trace.samples[i].rhoXX == 0.0);
            CHECK(trace.samples[i].source == qhe::Source::Theory);
            CHECK(trace.samples[i].run == 0);
            CHECK(trace.samples[i].shots == 0);
        }
    }
}

TEST_CASE("simplified model handles all four couplings", "[model]") {
    qhe::EngineParams p = default_params();
    p.gamma_h10 = 0.4;
    p.gamma_c20 = 0.25;
    const oracle::Chain c = oracle::chain(1.0L, 2.5L, 0.5L, 1.0L, 5.0L, 1.0L, 1.0L);
    const Eigen::Matrix3d g = oracle::rate_generator(
        1.0, 1.0, 0.4, 0.25, static_cast<double>(c.c2), static_cast<double>(c.eps10),
        static_cast<double>(c.eps20), 1.0, 5.0);

    const std::vector<double> grid = {0.0, 0.4, 1.7, 6.0};
    const Eigen::Vector3d rho0(0.0, 1.0, 0.0);
    const qhe::PopulationTrace trace = qhe::integrate_simplified(p, rho0, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK((populations_at(trace, i) - oracle::propagate(g, rho0, grid[i]))
                  .lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("simplified model integrates a disconnected graph", "[model]") {
    // cold edge switched off: no unique steady state, the integrator must
    // still track the exact propagator
    qhe::EngineParams p = default_params();
    p.gamma_c10 = 0.0;
    const oracle::Chain c = oracle::chain(1.0L, 2.5L, 0.5L, 1.0L, 5.0L, 1.0L, 0.0L);
    const Eigen::Matrix3d g = oracle::rate_generator(
        1.0, 0.0, 0.0, 0.0, static_cast<double>(c.c2), static_cast<double>(c.eps10),
        static_cast<double>(c.eps20), 1.0, 5.0);

    const std::vector<double> grid = {0.0, 0.9, 3.2};
    const Eigen::Vector3d rho0(0.2, 0.5, 0.3);
    const qhe::PopulationTrace trace = qhe::integrate_simplified(p, rho0, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        CHECK((populations_at(trace, i) - oracle::propagate(g, rho0, grid[i]))
                  .lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("relaxation to the steady state is monotone in L1", "[model]") {
    const qhe::EngineParams p = default_params();
    const Eigen::Vector3d ss = qhe::steady_state(p);
    std::vector<double> grid;
    for (int i = 0; i <= 88; ++i) grid.push_back(0.25 * i);
    const qhe::PopulationTrace trace = qhe::integrate_simplified(p, {0, 0, 1}, grid);
    double prev = 1e300;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = (populations_at(trace, i) - ss).cwiseAbs().sum();
        CHECK(d <= prev + 1e-12);
        prev = d;
    }
    CHECK(prev < 1e-8);
}

TEST_CASE("integrate_simplified validates its inputs", "[model]") {
    const qhe::EngineParams p = default_params();
    const std::vector<double> ok = {0.0, 1.0};
    const std::vector<double> decreasing = {1.0, 0.5};
    const std::vector<double> negative = {-0.5, 1.0};
    CHECK_THROWS_AS(qhe::integrate_simplified(p, {0.5, 0.5, 0.1}, ok), std::invalid_argument);
    CHECK_THROWS_AS(qhe::integrate_simplified(p, {1.0, 0.0, 0.0}, decreasing),
                    std::invalid_argument);
    CHECK_THROWS_AS(qhe::integrate_simplified(p, {1.0, 0.0, 0.0}, negative),
                    std::invalid_argument);
}

TEST_CASE("full model without drive reproduces the rate equation", "[model]") {
    const qhe::EngineParams p = default_params();
    const std::vector<double> grid = {0.0, 0.5, 1.0, 2.0, 3.5, 5.0};
    for (int init = 0; init < 3; ++init) {
        Eigen::Vector3d rho0 = Eigen::Vector3d::Zero();
        rho0(init) = 1.0;
        qhe::DensityMatrix3 r0 = qhe::DensityMatrix3::Zero();
        r0(init, init) = 1.0;

        const qhe::PopulationTrace simple = qhe::integrate_simplified(p, rho0, grid);
        const qhe::FullTrajectory full = qhe::integrate_full(p, r0, grid);
        REQUIRE(full.populations.samples.size() == grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& a = simple.samples[i];
            const auto& b = full.populations.samples[i];
            CHECK(b.rho00 == Approx(a.rho00).margin(1e-8));
            CHECK(b.rho11 == Approx(a.rho11).margin(1e-8));
            CHECK(b.rho22 == Approx(a.rho22).margin(1e-8));
            CHECK(b.source == qhe::Source::Theory);
            // diagonal initial states develop no coherence without a drive
            const auto& c = full.coherences[i];
            CHECK(std::abs(c.rho01) < 1e-12);
            CHECK(std::abs(c.rho02) < 1e-12);
            CHECK(std::abs(c.rho12) < 1e-12);
        }
    }
}

TEST_CASE("ground population is independent of the drive frequency", "[model]") {
    const std::vector<double> grid = {0.0, 0.5, 1.0, 1.75, 3.0, 5.0};
    for (int init : {1, 2}) {
        qhe::DensityMatrix3 r0 = qhe::DensityMatrix3::Zero();
        r0(init, init) = 1.0;

        qhe::EngineParams p0 = default_params();
        const qhe::FullTrajectory ref = qhe::integrate_full(p0, r0, grid);

        for (double w : {0.5, 1.5, 3.0}) {
            qhe::EngineParams pw = default_params();
            pw.omega_drive = w;
            const qhe::FullTrajectory run = qhe::integrate_full(pw, r0, grid);
            for (std::size_t i = 0; i < grid.size(); ++i) {
                CHECK(run.populations.samples[i].rho00 ==
                      Approx(ref.populations.samples[i].rho00).margin(1e-8));
                CHECK(run.populations.samples[i].source == qhe::Source::TheoryFull);
            }
        }
    }
}

TEST_CASE("resonant drive shifts the excited populations", "[model]") {
    // the simplified model cannot see the drive; the full one must
    qhe::EngineParams p = default_params();
    p.omega_drive = 1.5;
    qhe::DensityMatrix3 r0 = qhe::DensityMatrix3::Zero();
    r0(1, 1) = 1.0;
    const std::vector<double> grid = {0.0, 0.5, 1.0, 1.5, 2.0};
    const qhe::FullTrajectory full = qhe::integrate_full(p, r0, grid);
    const qhe::PopulationTrace simple = qhe::integrate_simplified(p, {0, 1, 0}, grid);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        max_diff = std::max(max_diff, std::abs(full.populations.samples[i].rho11 -
                                               simple.samples[i].rho11));
    CHECK(max_diff > 0.01);
}

TEST_CASE("full model conserves trace and positivity", "[model]") {
    qhe::EngineParams p = default_params();
    p.omega_drive = 1.5;
    qhe::DensityMatrix3 r0 = qhe::DensityMatrix3::Zero();
    r0(2, 2) = 1.0;
    const std::vector<double> grid = {0.0, 1.0, 2.5, 5.0};
    const qhe::FullTrajectory full = qhe::integrate_full(p, r0, grid);
    for (const auto& s : full.populations.samples) {
        CHECK(s.rho00 + s.rho11 + s.rho22 == Approx(1.0).margin(1e-9));
        CHECK(s.rho00 >= -1e-9);
        CHECK(s.rho11 >= -1e-9);
        CHECK(s.rho22 >= -1e-9);
    }
}

TEST_CASE("population traces round trip through CSV", "[model]") {
    qhe::PopulationTrace trace;
    trace.samples.push_back({0.0, 1.0, 0.0, 0.0, 0.0, qhe::Source::Theory, 0, 0});
    trace.samples.push_back({0.5, 0.25, 0.5, 0.125, 0.125, qhe::Source::SimNoisy, 3, 8192});
    trace.samples.push_back(
        {1.0, 0.9217296756, 0.0132393186, 0.0650310058, 0.0, qhe::Source::SimMitigated, 0, 40960});

    std::ostringstream os;
    qhe::write_csv(os, trace, "00ff00ff00ff00ff");
    std::istringstream is(os.str());
    std::optional<std::string> hash;
    const qhe::PopulationTrace back = qhe::read_csv(is, &hash);

    REQUIRE(hash.has_value());
    CHECK(*hash == "00ff00ff00ff00ff");
    REQUIRE(back.samples.size() == trace.samples.size());
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        CHECK(back.samples[i].t == Approx(trace.samples[i].t).margin(1e-12));
        CHECK(back.samples[i].rho00 == Approx(trace.samples[i].rho00).margin(1e-12));
        CHECK(back.samples[i].rho11 == Approx(trace.samples[i].rho11).margin(1e-12));
        CHECK(back.samples[i].rho22 == Approx(trace.samples[i].rho22).margin(1e-12));
        CHECK(back.samples[i].rhoXX == Approx(trace.samples[i].rhoXX).margin(1e-12));
        CHECK(back.samples[i].source == trace.samples[i].source);
        CHECK(back.samples[i].run == trace.samples[i].run);
        CHECK(back.samples[i].shots == trace.samples[i].shots);
    }
}
