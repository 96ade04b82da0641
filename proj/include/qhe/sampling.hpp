#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

#include "register.hpp"

namespace qhe {

/// splitmix64 step, the seed-derivation primitive used everywhere.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic child seed: fold each path component into the master seed
/// through splitmix64. Distinct paths give independent streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(master);
    for (std::uint64_t p : path) s = splitmix64(s ^ p);
    return s;
}

/// Uniform double in [0,1) from the top 53 bits, identical on every platform.
inline double uniform53(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/**
 * Measurement record over the two system qubits. Keys are bit strings with
 * q0 leftmost; values sum to shots.
 */
struct Counts {
    long shots = 0;
    std::map<std::string, long> table;

    void validate() const {
        if (shots <= 0) throw std::invalid_argument("Counts: shots must be positive");
        long sum = 0;
        for (const auto& [key, n] : table) {
            if (key.size() != 2 || (key.find_first_not_of("01") != std::string::npos))
                throw std::invalid_argument("Counts: bad bit string '" + key + "'");
            if (n < 0) throw std::invalid_argument("Counts: negative count");
            sum += n;
        }
        if (sum != shots) throw std::invalid_argument("Counts: counts must sum to shots");
    }
};

inline nlohmann::json to_json(const Counts& c) {
    nlohmann::json j;
    j["shots"] = c.shots;
    j["bit_order"] = "q0q1";
    j["counts"] = nlohmann::json::object();
    for (const auto& [key, n] : c.table) j["counts"][key] = n;
    return j;
}

inline Counts counts_from_json(const nlohmann::json& j) {
    Counts c;
    c.shots = j.at("shots").get<long>();
    if (j.value("bit_order", "q0q1") != std::string("q0q1"))
        throw std::invalid_argument("Counts: unsupported bit_order");
    for (const auto& [key, n] : j.at("counts").items()) c.table[key] = n.get<long>();
    c.validate();
    return c;
}

inline const std::array<std::string, 4>& basis_labels() {
    static const std::array<std::string, 4> labels = {"00", "01", "10", "11"};
    return labels;
}

/// Relative frequencies over {00, 01, 10, 11}.
inline Eigen::Vector4d counts_to_probs(const Counts& c) {
    c.validate();
    Eigen::Vector4d p = Eigen::Vector4d::Zero();
    for (const auto& [key, n] : c.table) {
        const auto& labels = basis_labels();
        const auto it = std::find(labels.begin(), labels.end(), key);
        p(it - labels.begin()) = static_cast<double>(n) / static_cast<double>(c.shots);
    }
    return p;
}

/// Push a 4-outcome distribution through per-qubit confusion matrices
/// (entry (i,j) = P(observe j | true i)). Empty readout = identity.
inline Eigen::Vector4d apply_readout(const Eigen::Vector4d& probs,
                                     std::span<const Eigen::Matrix2d> readout) {
    if (readout.empty()) return probs;
    if (readout.size() != 2)
        throw std::invalid_argument("apply_readout: need one confusion matrix per system qubit");
    Eigen::Vector4d out = Eigen::Vector4d::Zero();
    for (int t0 = 0; t0 < 2; ++t0)
        for (int t1 = 0; t1 < 2; ++t1) {
            const double p = probs(2 * t0 + t1);
            if (p == 0.0) continue;
            for (int o0 = 0; o0 < 2; ++o0)
                for (int o1 = 0; o1 < 2; ++o1)
                    out(2 * o0 + o1) += p * readout[0](t0, o0) * readout[1](t1, o1);
        }
    return out;
}

/**
 * Seeded multinomial sample of the readout-perturbed system-qubit marginal.
 * The generator is std::mt19937_64 fed through uniform53 and an inverse-CDF
 * lookup, so identical inputs give identical Counts on any platform.
 */
inline Counts sample_counts(const RegisterState& state, std::array<int, 2> system_qubits,
                            long shots, std::span<const Eigen::Matrix2d> readout,
                            std::uint64_t seed) {
    if (shots <= 0) throw std::invalid_argument("sample_counts: shots must be positive");
    const Eigen::Vector4d probs = apply_readout(marginal_populations(state, system_qubits), readout);

    Eigen::Vector4d cdf;
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        acc += probs(i);
        cdf(i) = acc;
    }
    cdf(3) = 1.0; // guard against rounding in the last bin

    std::mt19937_64 rng(seed);
    std::array<long, 4> hits = {0, 0, 0, 0};
    for (long s = 0; s < shots; ++s) {
        const double u = uniform53(rng);
        int k = 0;
        while (k < 3 && u >= cdf(k)) ++k;
        ++hits[k];
    }
    Counts c;
    c.shots = shots;
    for (int i = 0; i < 4; ++i)
        if (hits[i] > 0) c.table[basis_labels()[i]] = hits[i];
    return c;
}

} // namespace qhe
