#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qhe {

enum class GateKind { RY, X, CX, CRY, Reset, Barrier };

enum class Role { System, Ancilla, Probability };

/// A control wire with polarity. on_one = false means the gate fires when the
/// control qubit is |0>.
struct ControlSpec {
    int qubit = -1;
    bool on_one = true;

    friend bool operator==(const ControlSpec&, const ControlSpec&) = default;
};

/**
 * One circuit operation. RY/X/RESET touch only the target; CX has one
 * implicit on-1 control; CRY carries one or two polarized controls. BARRIER
 * touches no qubit and only delimits noise layers.
 */
struct GateOp {
    GateKind kind = GateKind::Barrier;
    int target = -1;
    double angle = 0.0;
    std::vector<ControlSpec> controls;

    static GateOp ry(int q, double angle) { return {GateKind::RY, q, angle, {}}; }
    static GateOp x(int q) { return {GateKind::X, q, 0.0, {}}; }
    static GateOp cx(int control, int target) {
        return {GateKind::CX, target, 0.0, {{control, true}}};
    }
    static GateOp cry(std::vector<ControlSpec> controls, int target, double angle) {
        return {GateKind::CRY, target, angle, std::move(controls)};
    }
    static GateOp reset(int q) { return {GateKind::Reset, q, 0.0, {}}; }
    static GateOp barrier() { return {}; }

    bool is_unitary() const {
        return kind == GateKind::RY || kind == GateKind::X || kind == GateKind::CX ||
               kind == GateKind::CRY;
    }

    /// Qubits the op touches, target last.
    std::vector<int> touched() const {
        if (kind == GateKind::Barrier) return {};
        std::vector<int> qs;
        for (const auto& c : controls) qs.push_back(c.qubit);
        qs.push_back(target);
        return qs;
    }

    void validate(int n_qubits) const {
        if (kind == GateKind::Barrier) {
            if (target != -1 || !controls.empty())
                throw std::invalid_argument("GateOp: BARRIER takes no qubits");
            return;
        }
        const auto qs = touched();
        std::set<int> seen;
        for (int q : qs) {
            if (q < 0 || q >= n_qubits) throw std::out_of_range("GateOp: qubit index out of range");
            if (!seen.insert(q).second)
                throw std::invalid_argument("GateOp: qubit indices must be distinct");
        }
        if (!std::isfinite(angle)) throw std::invalid_argument("GateOp: angle must be finite");
        const std::size_t nc = controls.size();
        switch (kind) {
            case GateKind::RY:
            case GateKind::X:
            case GateKind::Reset:
                if (nc != 0) throw std::invalid_argument("GateOp: unexpected controls");
                break;
            case GateKind::CX:
                if (nc != 1 || !controls[0].on_one)
                    throw std::invalid_argument("GateOp: CX takes one on-1 control");
                break;
            case GateKind::CRY:
                if (nc < 1 || nc > 2)
                    throw std::invalid_argument("GateOp: CRY takes one or two controls");
                break;
            case GateKind::Barrier:
                break;
        }
    }

    friend bool operator==(const GateOp&, const GateOp&) = default;
};

/// RY(-a), X, CX and CRY(-a) invert the unitary kinds; RESET and BARRIER have
/// no inverse channel and are rejected.
inline GateOp inverse(const GateOp& g) {
    switch (g.kind) {
        case GateKind::RY:
        case GateKind::CRY: {
            GateOp inv = g;
            inv.angle = -g.angle;
            return inv;
        }
        case GateKind::X:
        case GateKind::CX:
            return g;
        default:
            throw std::invalid_argument("inverse: op is not unitary");
    }
}

struct Circuit {
    int n_qubits = 0;
    std::vector<GateOp> ops;
    std::array<int, 2> system_qubits{0, 1};
    std::vector<std::string> qubit_names; // optional, size n_qubits when present
    std::vector<Role> roles;              // optional, size n_qubits when present

    void validate() const {
        if (n_qubits <= 0) throw std::invalid_argument("Circuit: n_qubits must be positive");
        if (system_qubits[0] == system_qubits[1])
            throw std::invalid_argument("Circuit: system_qubits must be distinct");
        for (int q : system_qubits)
            if (q < 0 || q >= n_qubits)
                throw std::out_of_range("Circuit: system qubit out of range");
        if (!qubit_names.empty() && static_cast<int>(qubit_names.size()) != n_qubits)
            throw std::invalid_argument("Circuit: qubit_names size mismatch");
        if (!roles.empty() && static_cast<int>(roles.size()) != n_qubits)
            throw std::invalid_argument("Circuit: roles size mismatch");
        for (const auto& op : ops) op.validate(n_qubits);
    }

    std::string name_of(int q) const {
        if (!qubit_names.empty()) return qubit_names.at(q);
        return "q" + std::to_string(q);
    }
};

namespace detail {

inline std::string fmt_angle(double a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5f", a);
    return buf;
}

inline std::string role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::Ancilla: return "ancilla";
        case Role::Probability: return "probability";
    }
    throw std::logic_error("role_name: bad Role");
}

inline Role role_from_name(const std::string& s) {
    if (s == "system") return Role::System;
    if (s == "ancilla") return Role::Ancilla;
    if (s == "probability") return Role::Probability;
    throw std::invalid_argument("unknown role: " + s);
}

} // namespace detail

/**
 * Line-oriented text form: header comments naming the register, then one op
 * per line (`RY q0 0.51824`, `CRY p0:on-0 q0 a0 1.33900`, `CX a0 q0`,
 * `RESET a0`, `BARRIER`). Controls precede the target; on-1 controls print
 * without a suffix. Angles carry five decimals, so the text form is a
 * golden-file format, not a lossless one.
 */
inline std::string to_text(const Circuit& c) {
    c.validate();
    std::ostringstream os;
    os << "# qubits:";
    for (int q = 0; q < c.n_qubits; ++q) os << ' ' << c.name_of(q);
    os << "\n# system: " << c.name_of(c.system_qubits[0]) << ' '
       << c.name_of(c.system_qubits[1]) << "\n";
    if (!c.roles.empty()) {
        os << "# roles:";
        for (Role r : c.roles) os << ' ' << detail::role_name(r);
        os << "\n";
    }
    for (const auto& op : c.ops) {
        switch (op.kind) {
            case GateKind::RY:
                os << "RY " << c.name_of(op.target) << ' ' << detail::fmt_angle(op.angle);
                break;
            case GateKind::X:
                os << "X " << c.name_of(op.target);
                break;
            case GateKind::CX:
                os << "CX " << c.name_of(op.controls[0].qubit) << ' ' << c.name_of(op.target);
                break;
            case GateKind::CRY: {
                os << "CRY";
                for (const auto& ctl : op.controls) {
                    os << ' ' << c.name_of(ctl.qubit);
                    if (!ctl.on_one) os << ":on-0";
                }
                os << ' ' << c.name_of(op.target) << ' ' << detail::fmt_angle(op.angle);
                break;
            }
            case GateKind::Reset:
                os << "RESET " << c.name_of(op.target);
                break;
            case GateKind::Barrier:
                os << "BARRIER";
                break;
        }
        os << "\n";
    }
    return os.str();
}

inline Circuit circuit_from_text(const std::string& text) {
    Circuit c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto index_of = [&](const std::string& name) {
        for (int q = 0; q < c.n_qubits; ++q)
            if (c.qubit_names[q] == name) return q;
        throw std::invalid_argument("circuit text: unknown qubit '" + name + "' at line " +
                                    std::to_string(lineno));
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "#") {
            std::string key;
            ls >> key;
            if (key == "qubits:") {
                std::string name;
                while (ls >> name) c.qubit_names.push_back(name);
                c.n_qubits = static_cast<int>(c.qubit_names.size());
            } else if (key == "system:") {
                std::string a, b;
                ls >> a >> b;
                c.system_qubits = {index_of(a), index_of(b)};
            } else if (key == "roles:") {
                std::string r;
                while (ls >> r) c.roles.push_back(detail::role_from_name(r));
            }
            continue;
        }
        if (c.n_qubits == 0)
            throw std::invalid_argument("circuit text: missing '# qubits:' header");
        if (tok == "RY") {
            std::string q;
            double a;
            ls >> q >> a;
            c.ops.push_back(GateOp::ry(index_of(q), a));
        } else if (tok == "X") {
            std::string q;
            ls >> q;
            c.ops.push_back(GateOp::x(index_of(q)));
        } else if (tok == "CX") {
            std::string ctl, tgt;
            ls >> ctl >> tgt;
            c.ops.push_back(GateOp::cx(index_of(ctl), index_of(tgt)));
        } else if (tok == "CRY") {
            std::vector<std::string> words;
            std::string w;
            while (ls >> w) words.push_back(w);
            if (words.size() < 3)
                throw std::invalid_argument("circuit text: malformed CRY at line " +
                                            std::to_string(lineno));
            const double a = std::stod(words.back());
            words.pop_back();
            const std::string tgt = words.back();
            words.pop_back();
            std::vector<ControlSpec> ctls;
            for (auto& cw : words) {
                ControlSpec ctl;
                const auto pos = cw.find(':');
                std::string name = cw.substr(0, pos);
                if (pos != std::string::npos) {
                    const std::string pol = cw.substr(pos + 1);
                    if (pol == "on-0") ctl.on_one = false;
                    else if (pol == "on-1") ctl.on_one = true;
                    else
                        throw std::invalid_argument("circuit text: bad polarity at line " +
                                                    std::to_string(lineno));
                }
                ctl.qubit = index_of(name);
                ctls.push_back(ctl);
            }
            c.ops.push_back(GateOp::cry(std::move(ctls), index_of(tgt), a));
        } else if (tok == "RESET") {
            std::string q;
            ls >> q;
            c.ops.push_back(GateOp::reset(index_of(q)));
        } else if (tok == "BARRIER") {
            c.ops.push_back(GateOp::barrier());
        } else {
            throw std::invalid_argument("circuit text: unknown op '" + tok + "' at line " +
                                        std::to_string(lineno));
        }
    }
    if (c.n_qubits == 0) throw std::invalid_argument("circuit text: empty input");
    c.validate();
    return c;
}

} // namespace qhe
