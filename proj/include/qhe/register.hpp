#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "gate.hpp"
#include "noise.hpp"

namespace qhe {

/**
 * Exact density matrix of a small qubit register. Basis labels are bit
 * strings with qubit 0 as the most significant bit, so |10> on two qubits
 * means q0 = 1, q1 = 0. Values are immutable; operations return new states.
 */
class RegisterState {
  public:
    explicit RegisterState(int n_qubits) : n_(check_n(n_qubits)) {
        rho_ = Eigen::MatrixXcd::Zero(dim(), dim());
        rho_(0, 0) = 1.0;
    }

    /// Computational basis state; bits follow the q0-is-MSB convention.
    static RegisterState basis(int n_qubits, unsigned long bits) {
        RegisterState s(n_qubits);
        if (bits >= static_cast<unsigned long>(s.dim()))
            throw std::out_of_range("RegisterState::basis: bits out of range");
        s.rho_(0, 0) = 0.0;
        s.rho_(bits, bits) = 1.0;
        return s;
    }

    static RegisterState from_matrix(int n_qubits, Eigen::MatrixXcd rho) {
        RegisterState s(n_qubits);
        if (rho.rows() != s.dim() || rho.cols() != s.dim())
            throw std::invalid_argument("RegisterState: dimension mismatch");
        s.rho_ = std::move(rho);
        s.check();
        return s;
    }

    int n_qubits() const { return n_; }
    Eigen::Index dim() const { return Eigen::Index(1) << n_; }
    const Eigen::MatrixXcd& matrix() const { return rho_; }

    /// Bit mask selecting qubit q inside a basis label.
    unsigned long mask(int q) const {
        if (q < 0 || q >= n_) throw std::out_of_range("RegisterState: qubit index");
        return 1ul << (n_ - 1 - q);
    }

    /// Invariants: Hermitian within 1e-10, trace 1 within 1e-9, smallest
    /// eigenvalue >= -1e-8.
    void check() const {
        if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
            throw std::runtime_error("RegisterState: not Hermitian");
        if (std::abs(rho_.trace() - std::complex<double>(1.0, 0.0)) > 1e-9)
            throw std::runtime_error("RegisterState: trace must be 1");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-8)
            throw std::runtime_error("RegisterState: negative eigenvalue");
    }

  private:
    static int check_n(int n) {
        if (n < 1 || n > 12) throw std::invalid_argument("RegisterState: 1..12 qubits");
        return n;
    }
    friend RegisterState apply_gate(const RegisterState&, const GateOp&);
    friend RegisterState apply_depolarizing(const RegisterState&, std::span<const int>, double);
    friend RegisterState apply_relaxation(const RegisterState&, int, double);
    friend RegisterState apply_kraus1(const RegisterState&, int,
                                      std::span<const Eigen::Matrix2cd>);

    int n_;
    Eigen::MatrixXcd rho_;
};

namespace detail {

// rho -> sum_K (K on qubit q) rho (K on qubit q)^dagger, with every K gated
// on the control mask. Unitary conjugation is the single-K case.
inline Eigen::MatrixXcd conjugate1(const Eigen::MatrixXcd& rho, Eigen::Index dim,
                                   unsigned long tmask, unsigned long cmask,
                                   unsigned long cval,
                                   std::span<const Eigen::Matrix2cd> kraus) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
    const bool single = kraus.size() == 1;
    Eigen::MatrixXcd work;
    for (const auto& k : kraus) {
        // rows: left-multiply by the embedded K
        work = rho;
        for (Eigen::Index i0 = 0; i0 < dim; ++i0) {
            if (i0 & tmask) continue;
            if ((i0 & cmask) != cval) continue;
            const Eigen::Index i1 = static_cast<Eigen::Index>(i0 | tmask);
            for (Eigen::Index j = 0; j < dim; ++j) {
                const std::complex<double> r0 = rho(i0, j);
                const std::complex<double> r1 = rho(i1, j);
                work(i0, j) = k(0, 0) * r0 + k(0, 1) * r1;
                work(i1, j) = k(1, 0) * r0 + k(1, 1) * r1;
            }
        }
        // columns: right-multiply by the embedded K^dagger
        for (Eigen::Index j0 = 0; j0 < dim; ++j0) {
            if (j0 & tmask) continue;
            if ((j0 & cmask) != cval) continue;
            const Eigen::Index j1 = static_cast<Eigen::Index>(j0 | tmask);
            for (Eigen::Index i = 0; i < dim; ++i) {
                const std::complex<double> c0 = work(i, j0);
                const std::complex<double> c1 = work(i, j1);
                work(i, j0) = std::conj(k(0, 0)) * c0 + std::conj(k(0, 1)) * c1;
                work(i, j1) = std::conj(k(1, 0)) * c0 + std::conj(k(1, 1)) * c1;
            }
        }
        if (single) return work;
        out += work;
    }
    return out;
}

inline void control_masks(const RegisterState& s, const GateOp& g, unsigned long& cmask,
                          unsigned long& cval) {
    cmask = 0;
    cval = 0;
    for (const auto& c : g.controls) {
        cmask |= s.mask(c.qubit);
        if (c.on_one) cval |= s.mask(c.qubit);
    }
}

} // namespace detail

/// Kraus set of the amplitude-damping (relaxation toward |0>) channel.
inline std::vector<Eigen::Matrix2cd> relaxation_kraus(double p) {
    Eigen::Matrix2cd k0 = Eigen::Matrix2cd::Zero();
    Eigen::Matrix2cd k1 = Eigen::Matrix2cd::Zero();
    k0(0, 0) = 1.0;
    k0(1, 1) = std::sqrt(1.0 - p);
    k1(0, 1) = std::sqrt(p);
    return {k0, k1};
}

/// Kraus set of RESET: trace out and reprepare |0>.
inline std::vector<Eigen::Matrix2cd> reset_kraus() { return relaxation_kraus(1.0); }

/// Kraus set of the 1-qubit depolarizing channel in the convention
/// rho -> (1-p) rho + p I/2 tr_q rho.
inline std::vector<Eigen::Matrix2cd> depolarizing_kraus1(double p) {
    const double w0 = std::sqrt(1.0 - 0.75 * p);
    const double w = std::sqrt(0.25 * p);
    Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    Eigen::Matrix2cd sx, sy, sz;
    sx << 0, 1, 1, 0;
    sy << 0, std::complex<double>(0, -1), std::complex<double>(0, 1), 0;
    sz << 1, 0, 0, -1;
    return {w0 * id, w * sx, w * sy, w * sz};
}

/// Kraus set of the joint 2-qubit depolarizing channel,
/// rho -> (1-p) rho + p I/4 tr_{qq'} rho.
inline std::vector<Eigen::Matrix4cd> depolarizing_kraus2(double p) {
    Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    Eigen::Matrix2cd sx, sy, sz;
    sx << 0, 1, 1, 0;
    sy << 0, std::complex<double>(0, -1), std::complex<double>(0, 1), 0;
    sz << 1, 0, 0, -1;
    const std::array<Eigen::Matrix2cd, 4> paulis = {id, sx, sy, sz};
    std::vector<Eigen::Matrix4cd> ks;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const double w = (a == 0 && b == 0) ? std::sqrt(1.0 - 15.0 / 16.0 * p)
                                                : std::sqrt(p / 16.0);
            Eigen::Matrix4cd k;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    k.block<2, 2>(2 * i, 2 * j) = paulis[a](i, j) * paulis[b];
            ks.push_back(w * k);
        }
    return ks;
}

inline RegisterState apply_kraus1(const RegisterState& s, int qubit,
                                  std::span<const Eigen::Matrix2cd> kraus) {
    RegisterState out = s;
    out.rho_ = detail::conjugate1(s.rho_, s.dim(), s.mask(qubit), 0, 0, kraus);
    return out;
}

/**
 * Apply one GateOp. Unitaries act by conjugation; RESET is the trace-out-and-
 * reprepare channel; BARRIER is the identity here (noise layering happens in
 * evolve).
 */
inline RegisterState apply_gate(const RegisterState& s, const GateOp& g) {
    g.validate(s.n_qubits());
    if (g.kind == GateKind::Barrier) return s;

    if (g.kind == GateKind::Reset) {
        const auto ks = reset_kraus();
        return apply_kraus1(s, g.target, ks);
    }

    Eigen::Matrix2cd u;
    switch (g.kind) {
        case GateKind::RY:
        case GateKind::CRY: {
            const double c = std::cos(0.5 * g.angle);
            const double v = std::sin(0.5 * g.angle);
            u << c, -v, v, c;
            break;
        }
        case GateKind::X:
        case GateKind::CX:
            u << 0, 1, 1, 0;
            break;
        default:
            throw std::logic_error("apply_gate: unhandled kind");
    }
    unsigned long cmask = 0, cval = 0;
    detail::control_masks(s, g, cmask, cval);
    RegisterState out = s;
    const std::array<Eigen::Matrix2cd, 1> ks = {u};
    out.rho_ = detail::conjugate1(s.rho_, s.dim(), s.mask(g.target), cmask, cval, ks);
    return out;
}

/**
 * Joint depolarizing channel on a small qubit set,
 * rho -> (1-p) rho + p (I/2^k (x) tr_S rho). Matches the Kraus sets above
 * for k = 1, 2; k = 3 covers the doubly-controlled rotations.
 */
inline RegisterState apply_depolarizing(const RegisterState& s, std::span<const int> qubits,
                                        double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("apply_depolarizing: p in [0,1]");
    if (qubits.empty() || qubits.size() > 3)
        throw std::invalid_argument("apply_depolarizing: one to three qubits");
    unsigned long smask = 0;
    for (int q : qubits) {
        const unsigned long m = s.mask(q);
        if (smask & m) throw std::invalid_argument("apply_depolarizing: duplicate qubit");
        smask |= m;
    }
    if (p == 0.0) return s;

    const Eigen::Index dim = s.dim();
    const int k = static_cast<int>(qubits.size());
    const int nsub = 1 << k;
    // enumerate the bit patterns of the selected qubits
    std::vector<unsigned long> patterns;
    patterns.reserve(nsub);
    std::vector<unsigned long> qmasks;
    for (int q : qubits) qmasks.push_back(s.mask(q));
    for (int b = 0; b < nsub; ++b) {
        unsigned long bits = 0;
        for (int i = 0; i < k; ++i)
            if (b & (1 << i)) bits |= qmasks[i];
        patterns.push_back(bits);
    }

    RegisterState out = s;
    out.rho_ *= (1.0 - p);
    const double w = p / nsub;
    for (Eigen::Index i0 = 0; i0 < dim; ++i0) {
        if (i0 & smask) continue;
        for (Eigen::Index j0 = 0; j0 < dim; ++j0) {
            if (j0 & smask) continue;
            std::complex<double> tr = 0.0;
            for (unsigned long b : patterns) tr += s.rho_(i0 | b, j0 | b);
            for (unsigned long a : patterns) out.rho_(i0 | a, j0 | a) += w * tr;
        }
    }
    return out;
}

/// Amplitude damping toward |0> with probability p on one qubit.
inline RegisterState apply_relaxation(const RegisterState& s, int qubit, double p) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("apply_relaxation: p in [0,1]");
    if (p == 0.0) return s;
    const auto ks = relaxation_kraus(p);
    return apply_kraus1(s, qubit, ks);
}

/// Partial trace onto the listed qubits, ordered as given (first listed
/// qubit becomes the most significant bit of the reduced label).
inline Eigen::MatrixXcd partial_trace(const RegisterState& s, std::span<const int> keep) {
    const int k = static_cast<int>(keep.size());
    if (k < 1 || k > s.n_qubits()) throw std::invalid_argument("partial_trace: bad keep list");
    std::vector<unsigned long> kmasks;
    unsigned long keep_mask = 0;
    for (int q : keep) {
        const unsigned long m = s.mask(q);
        if (keep_mask & m) throw std::invalid_argument("partial_trace: duplicate qubit");
        keep_mask |= m;
        kmasks.push_back(m);
    }
    const Eigen::Index rdim = Eigen::Index(1) << k;
    auto spread = [&](Eigen::Index r) {
        unsigned long bits = 0;
        for (int i = 0; i < k; ++i)
            if (r & (Eigen::Index(1) << (k - 1 - i))) bits |= kmasks[i];
        return bits;
    };
    Eigen::MatrixXcd red = Eigen::MatrixXcd::Zero(rdim, rdim);
    const Eigen::Index dim = s.dim();
    for (Eigen::Index r = 0; r < rdim; ++r) {
        const unsigned long rb = spread(r);
        for (Eigen::Index c = 0; c < rdim; ++c) {
            const unsigned long cb = spread(c);
            std::complex<double> acc = 0.0;
            for (Eigen::Index e = 0; e < dim; ++e) {
                if (e & keep_mask) continue;
                acc += s.matrix()(e | rb, e | cb);
            }
            red(r, c) = acc;
        }
    }
    return red;
}

/// Populations of the two system qubits over {00, 01, 10, 11}, q0 leftmost.
inline Eigen::Vector4d marginal_populations(const RegisterState& s,
                                            std::array<int, 2> system_qubits) {
    const std::array<int, 2> keep = system_qubits;
    const Eigen::MatrixXcd red = partial_trace(s, keep);
    Eigen::Vector4d probs = red.diagonal().real();
    const double sum = probs.sum();
    if (std::abs(sum - 1.0) > 1e-10)
        throw std::runtime_error("marginal_populations: probabilities do not sum to 1");
    return probs;
}

/**
 * Run a circuit by exact channel composition. With a NoiseModel, a matching
 * depolarizing channel follows every non-barrier op (p_dep1 for 1-qubit ops,
 * p_dep2 jointly for wider ones) and a relaxation layer hits every qubit at
 * each BARRIER, plus once at the end when ops followed the last BARRIER.
 */
inline RegisterState evolve(const Circuit& c, const RegisterState& initial,
                            const NoiseModel* noise = nullptr) {
    c.validate();
    if (initial.n_qubits() != c.n_qubits)
        throw std::invalid_argument("evolve: register size mismatch");
    if (noise) noise->validate();

    RegisterState state = initial;
    auto relax_layer = [&]() {
        if (!noise || noise->p_relax <= 0.0) return;
        for (int q = 0; q < c.n_qubits; ++q)
            state = apply_relaxation(state, q, noise->p_relax);
    };

    bool layer_has_ops = false;
    for (const auto& op : c.ops) {
        if (op.kind == GateKind::Barrier) {
            relax_layer();
            layer_has_ops = false;
            continue;
        }
        state = apply_gate(state, op);
        layer_has_ops = true;
        if (!noise) continue;
        const auto qs = op.touched();
        const double p = qs.size() == 1 ? noise->p_dep1 : noise->p_dep2;
        if (p > 0.0) state = apply_depolarizing(state, qs, p);
    }
    if (layer_has_ops) relax_layer();
    return state;
}

} // namespace qhe
