// Builds the six qubit engine circuit for a short schedule, prints its text
// form, and compares the ideal register populations against the reference
// model on the same grid.

#include <qhe/qhe.hpp>

#include <cstdio>

int main() {
    const qhe::EngineParams params;
    const double t = 5.0;

    const qhe::StepPlan plan{t, 2, qhe::PQubitMode::ReprepareEachStep};
    const qhe::Circuit circuit = qhe::build_engine_circuit(params, plan, 0);
    std::printf("%s\n", qhe::to_text(circuit).c_str());

    const qhe::RegisterState state =
        qhe::evolve(circuit, qhe::RegisterState(circuit.n_qubits), nullptr);
    const Eigen::Vector4d sim = qhe::marginal_populations(state, circuit.system_qubits);

    const std::vector<double> grid = {0.0, t};
    const Eigen::Vector3d rho0(1.0, 0.0, 0.0);
    const qhe::PopulationTrace ref = qhe::integrate_simplified(params, rho0, grid);
    const auto& last = ref.samples.back();

    std::printf("t = %.2f\n", t);
    std::printf("%-12s rho00      rho11      rho22      leak\n", "");
    std::printf("%-12s %.6f   %.6f   %.6f   %.6f\n", "circuit", sim(0), sim(1), sim(2), sim(3));
    std::printf("%-12s %.6f   %.6f   %.6f   %.6f\n", "reference", last.rho00, last.rho11,
                last.rho22, 0.0);

    const Eigen::Vector3d steady = qhe::steady_state(params);
    std::printf("%-12s %.6f   %.6f   %.6f\n", "steady", steady(0), steady(1), steady(2));
    return 0;
}
