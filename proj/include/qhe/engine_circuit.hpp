#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "gate.hpp"
#include "params.hpp"
#include "sampling.hpp"

namespace qhe {

/**
 * Fixed qubit roles of the six-qubit engine register: q0/q1 carry the logical
 * three-level state (|eps0> = |00>, |eps1> = |01>, |eps2> = |10>, leakage
 * |X> = |11>), a0/a1 absorb damped amplitude, p0/p1 select the decay vs
 * excitation branch.
 */
struct EngineLayout {
    int q0 = 0, q1 = 1;
    int a0 = 2, a1 = 3;
    int p0 = 4, p1 = 5;
    static constexpr int n_qubits = 6;

    std::array<int, 2> system() const { return {q0, q1}; }
    std::vector<std::string> names() const {
        std::vector<std::string> n(n_qubits);
        n[q0] = "q0";
        n[q1] = "q1";
        n[a0] = "a0";
        n[a1] = "a1";
        n[p0] = "p0";
        n[p1] = "p1";
        return n;
    }
    std::vector<Role> roles() const {
        std::vector<Role> r(n_qubits);
        r[q0] = r[q1] = Role::System;
        r[a0] = r[a1] = Role::Ancilla;
        r[p0] = r[p1] = Role::Probability;
        return r;
    }
    void validate() const {
        unsigned seen = 0;
        for (int q : {q0, q1, a0, a1, p0, p1}) {
            if (q < 0 || q >= n_qubits) throw std::invalid_argument("EngineLayout: bad index");
            seen |= 1u << q;
        }
        if (seen != 0b111111u) throw std::invalid_argument("EngineLayout: roles must cover 0..5");
    }
};

enum class PQubitMode { ReprepareEachStep, PrepareOnce };

inline std::string_view to_string(PQubitMode m) {
    return m == PQubitMode::ReprepareEachStep ? "reprepare-each-step" : "prepare-once";
}

inline PQubitMode p_qubit_mode_from_string(std::string_view s) {
    if (s == "reprepare-each-step") return PQubitMode::ReprepareEachStep;
    if (s == "prepare-once") return PQubitMode::PrepareOnce;
    throw std::invalid_argument("unknown p_qubit_mode: " + std::string(s));
}

/// Splitting of the target time into equal damping steps.
struct StepPlan {
    double t_total = 0.0;
    int n_steps = 2;
    PQubitMode p_qubit_mode = PQubitMode::ReprepareEachStep;

    double dt() const { return t_total / n_steps; }
    void validate() const {
        if (n_steps < 1) throw std::invalid_argument("StepPlan: n_steps >= 1");
        if (!(t_total >= 0.0)) throw std::invalid_argument("StepPlan: t_total >= 0");
    }
};

/// X gates placing the register in the logical encoding of |eps_i>.
inline std::vector<GateOp> encode_initial(int eps_index, const EngineLayout& layout = {}) {
    layout.validate();
    switch (eps_index) {
        case 0: return {};
        case 1: return {GateOp::x(layout.q1)};
        case 2: return {GateOp::x(layout.q0)};
        default:
            throw std::invalid_argument("encode_initial: eps_index must be 0, 1 or 2");
    }
}

/**
 * Dilated bath fragment on (system, ancilla, probability). The probability
 * qubit selects the branch: on |0> the amplitude-damping dilation
 * CRY(2theta) from system onto the ancilla plus CX back, on |1> its
 * X-conjugated mirror. Tracing out ancilla and probability yields exactly
 * GAD(p, sin^2 theta) on the system qubit.
 */
inline std::vector<GateOp> gad_fragment(int system, int ancilla, int probability,
                                        double two_theta) {
    return {
        GateOp::cry({{probability, false}, {system, true}}, ancilla, two_theta),
        GateOp::cry({{probability, true}, {system, false}}, ancilla, two_theta),
        GateOp::cx(ancilla, system),
    };
}

inline std::vector<GateOp> build_gad_hot(const DerivedParams& d, const EngineLayout& layout = {}) {
    if (d.dt < 0.0) throw std::invalid_argument("build_gad_hot: dt >= 0 required");
    return gad_fragment(layout.q0, layout.a0, layout.p0, 2.0 * d.theta_hd);
}

inline std::vector<GateOp> build_gad_cold(const DerivedParams& d, const EngineLayout& layout = {}) {
    if (d.dt < 0.0) throw std::invalid_argument("build_gad_cold: dt >= 0 required");
    return gad_fragment(layout.q1, layout.a1, layout.p1, 2.0 * d.theta_cd);
}

/**
 * Full engine circuit: initial encoding, probability-qubit preparation, then
 * n_steps damping steps of GAD_hot + GAD_cold with ancilla resets between
 * steps (and probability-qubit re-preparation in reprepare-each-step mode).
 * BARRIERs delimit the steps for noise layering.
 */
inline Circuit build_engine_circuit(const EngineParams& params, const StepPlan& plan,
                                    int init_eps, const EngineLayout& layout = {}) {
    plan.validate();
    layout.validate();
    const DerivedParams d = derive_params(params, plan.dt());

    Circuit c;
    c.n_qubits = EngineLayout::n_qubits;
    c.system_qubits = layout.system();
    c.qubit_names = layout.names();
    c.roles = layout.roles();

    auto extend = [&](const std::vector<GateOp>& ops) {
        c.ops.insert(c.ops.end(), ops.begin(), ops.end());
    };
    auto prepare_p = [&]() {
        c.ops.push_back(GateOp::ry(layout.p0, d.alpha_h));
        c.ops.push_back(GateOp::ry(layout.p1, d.alpha_c));
    };

    extend(encode_initial(init_eps, layout));
    prepare_p();
    for (int step = 0; step < plan.n_steps; ++step) {
        if (step > 0) c.ops.push_back(GateOp::barrier());
        extend(build_gad_hot(d, layout));
        extend(build_gad_cold(d, layout));
        if (step + 1 < plan.n_steps) {
            c.ops.push_back(GateOp::reset(layout.a0));
            c.ops.push_back(GateOp::reset(layout.a1));
            if (plan.p_qubit_mode == PQubitMode::ReprepareEachStep) {
                c.ops.push_back(GateOp::reset(layout.p0));
                c.ops.push_back(GateOp::reset(layout.p1));
                prepare_p();
            }
        }
    }
    c.validate();
    return c;
}

/// Relative frequencies mapped through the logical encoding:
/// (rho00, rho11, rho22, rhoXX) = f("00"), f("01"), f("10"), f("11").
inline Eigen::Vector4d populations_from_counts(const Counts& c) { return counts_to_probs(c); }

/**
 * GEM calibration circuits. C1 = preparation + first damping block + its
 * inverse; C2 = preparation + inverse of the second block + the block.
 * Resets and initial-state encodings are excluded; both circuits are exact
 * identities on the system qubits under ideal evolution. The engine must
 * split into exactly two BARRIER-delimited blocks.
 */
inline std::pair<Circuit, Circuit> build_calibration_circuits(const Circuit& engine) {
    engine.validate();
    if (engine.roles.empty())
        throw std::invalid_argument("build_calibration_circuits: engine lacks role labels");

    std::vector<std::vector<GateOp>> segments(1);
    for (const auto& op : engine.ops) {
        if (op.kind == GateKind::Barrier) segments.emplace_back();
        else segments.back().push_back(op);
    }
    if (segments.size() != 2)
        throw std::invalid_argument(
            "build_calibration_circuits: engine does not split into two blocks");

    // first RY on each probability qubit, in circuit order
    std::vector<GateOp> prep;
    std::vector<bool> prepared(engine.n_qubits, false);
    for (const auto& op : segments[0]) {
        if (op.kind != GateKind::RY) continue;
        if (engine.roles[op.target] != Role::Probability) continue;
        if (prepared[op.target]) continue;
        prepared[op.target] = true;
        prep.push_back(op);
    }
    if (prep.empty())
        throw std::invalid_argument(
            "build_calibration_circuits: no probability-qubit preparation found");

    auto gad_block = [](const std::vector<GateOp>& seg) {
        std::vector<GateOp> block;
        for (const auto& op : seg)
            if (op.kind == GateKind::CRY || op.kind == GateKind::CX) block.push_back(op);
        return block;
    };
    const std::vector<GateOp> block1 = gad_block(segments[0]);
    const std::vector<GateOp> block2 = gad_block(segments[1]);
    if (block1.empty() || block2.empty())
        throw std::invalid_argument("build_calibration_circuits: empty damping block");

    auto inverted = [](const std::vector<GateOp>& block) {
        std::vector<GateOp> inv;
        for (auto it = block.rbegin(); it != block.rend(); ++it) inv.push_back(inverse(*it));
        return inv;
    };

    Circuit base;
    base.n_qubits = engine.n_qubits;
    base.system_qubits = engine.system_qubits;
    base.qubit_names = engine.qubit_names;
    base.roles = engine.roles;

    Circuit c1 = base;
    c1.ops = prep;
    c1.ops.insert(c1.ops.end(), block1.begin(), block1.end());
    c1.ops.push_back(GateOp::barrier());
    const auto inv1 = inverted(block1);
    c1.ops.insert(c1.ops.end(), inv1.begin(), inv1.end());
    c1.validate();

    Circuit c2 = base;
    c2.ops = prep;
    const auto inv2 = inverted(block2);
    c2.ops.insert(c2.ops.end(), inv2.begin(), inv2.end());
    c2.ops.push_back(GateOp::barrier());
    c2.ops.insert(c2.ops.end(), block2.begin(), block2.end());
    c2.validate();

    return {c1, c2};
}

} // namespace qhe
