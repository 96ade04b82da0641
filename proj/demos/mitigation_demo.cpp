// Runs one grid point of the engine under the default synthetic noise model,
// builds the two calibration circuits, and shows what the mitigation step
// recovers.

#include <qhe/qhe.hpp>

#include <cstdio>

namespace {

double l1(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
    return (a - b).cwiseAbs().sum();
}

void print_dist(const char* label, const Eigen::Vector4d& p) {
    std::printf("%-10s %.5f  %.5f  %.5f  %.5f\n", label, p(0), p(1), p(2), p(3));
}

} // namespace

int main() {
    const qhe::EngineParams params;
    const qhe::NoiseModel noise = qhe::NoiseModel::defaults();
    const double t = 2.5;
    const long shots = 8192;
    const int runs = 5;
    const std::uint64_t seed = 7;

    const qhe::StepPlan plan{t, 2, qhe::PQubitMode::ReprepareEachStep};
    const qhe::Circuit engine = qhe::build_engine_circuit(params, plan, 0);
    const qhe::RegisterState state =
        qhe::evolve(engine, qhe::RegisterState(engine.n_qubits), &noise);

    // averaged raw distribution, as the experiment stage would produce it
    Eigen::Vector4d raw = Eigen::Vector4d::Zero();
    for (int r = 0; r < runs; ++r) {
        const qhe::Counts counts =
            qhe::sample_counts(state, engine.system_qubits, shots, noise.readout,
                               qhe::derive_seed(seed, {1, static_cast<std::uint64_t>(r)}));
        raw += qhe::counts_to_probs(counts);
    }
    raw /= runs;

    const auto [c1, c2] = qhe::build_calibration_circuits(engine);
    const qhe::CircuitEval eval = [&](const qhe::Circuit& c, long n,
                                      std::uint64_t s) -> Eigen::Vector4d {
        const qhe::RegisterState st = qhe::evolve(c, qhe::RegisterState(c.n_qubits), &noise);
        if (n == 0) return qhe::apply_readout(qhe::marginal_populations(st, c.system_qubits),
                                              noise.readout);
        return qhe::counts_to_probs(qhe::sample_counts(st, c.system_qubits, n, noise.readout, s));
    };
    const qhe::CalibrationMatrix cal =
        qhe::build_calibration_matrix(eval, c1, c2, shots, qhe::derive_seed(seed, {2}));
    const qhe::MitigationResult res = qhe::mitigate(raw, cal);

    // ideal circuit populations as the target
    const qhe::RegisterState ideal =
        qhe::evolve(engine, qhe::RegisterState(engine.n_qubits), nullptr);
    const Eigen::Vector4d target = qhe::marginal_populations(ideal, engine.system_qubits);

    print_dist("target", target);
    print_dist("raw", raw);
    print_dist("mitigated", res.x);
    std::printf("\nL1 raw -> target        %.5f\n", l1(raw, target));
    std::printf("L1 mitigated -> target  %.5f\n", l1(res.x, target));
    std::printf("residual %.3e   kkt %.3e\n", res.residual, res.kkt_residual);
    return 0;
}
