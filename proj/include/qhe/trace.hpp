#pragma once

#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qhe {

/// Provenance tag for a trace row.
enum class Source {
    Theory,        ///< simplified rate-equation model
    TheoryFull,    ///< full master equation with drive
    SimIdeal,      ///< noiseless circuit simulation
    SimNoisy,      ///< circuit simulation under a NoiseModel
    SimMitigated,  ///< noisy simulation after error mitigation
};

inline std::string_view to_string(Source s) {
    switch (s) {
        case Source::Theory: return "theory";
        case Source::TheoryFull: return "theory-full";
        case Source::SimIdeal: return "sim-ideal";
        case Source::SimNoisy: return "sim-noisy";
        case Source::SimMitigated: return "sim-mitigated";
    }
    throw std::logic_error("to_string: bad Source");
}

inline Source source_from_string(std::string_view s) {
    if (s == "theory") return Source::Theory;
    if (s == "theory-full") return Source::TheoryFull;
    if (s == "sim-ideal") return Source::SimIdeal;
    if (s == "sim-noisy") return Source::SimNoisy;
    if (s == "sim-mitigated") return Source::SimMitigated;
    throw std::invalid_argument("unknown source tag: " + std::string(s));
}

/**
 * One row of a population trace. rhoXX is the leakage population outside the
 * three-level subspace; exact model rows keep it at zero. run = 0 with
 * shots = 0 marks an exact (infinite-shot) row, run >= 1 a sampled run.
 */
struct PopulationSample {
    double t = 0.0;
    double rho00 = 0.0;
    double rho11 = 0.0;
    double rho22 = 0.0;
    double rhoXX = 0.0;
    Source source = Source::Theory;
    int run = 0;
    long shots = 0;
};

struct PopulationTrace {
    std::vector<PopulationSample> samples;

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
    void append(const PopulationTrace& other) {
        samples.insert(samples.end(), other.samples.begin(), other.samples.end());
    }
};

namespace detail {
inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}
} // namespace detail

/**
 * Write a trace as CSV with header t,rho00,rho11,rho22,rhoXX,source,run,shots.
 * An optional config hash is embedded as a leading comment line so downstream
 * merges can refuse mixed provenance.
 */
inline void write_csv(std::ostream& os, const PopulationTrace& trace,
                      std::optional<std::string> config_hash = std::nullopt) {
    if (config_hash) os << "# config_hash=" << *config_hash << "\n";
    os << "t,rho00,rho11,rho22,rhoXX,source,run,shots\n";
    for (const auto& s : trace.samples) {
        os << detail::fmt_g(s.t) << ',' << detail::fmt_g(s.rho00) << ','
           << detail::fmt_g(s.rho11) << ',' << detail::fmt_g(s.rho22) << ','
           << detail::fmt_g(s.rhoXX) << ',' << to_string(s.source) << ','
           << s.run << ',' << s.shots << "\n";
    }
}

/// Read a trace written by write_csv. Returns the trace and the embedded
/// config hash, if any.
inline PopulationTrace read_csv(std::istream& is,
                                std::optional<std::string>* config_hash = nullptr) {
    if (config_hash) config_hash->reset();
    PopulationTrace trace;
    std::string line;
    bool header_seen = false;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string key = "# config_hash=";
            if (config_hash && line.rfind(key, 0) == 0)
                *config_hash = line.substr(key.size());
            continue;
        }
        if (!header_seen) {
            if (line != "t,rho00,rho11,rho22,rhoXX,source,run,shots")
                throw std::invalid_argument("trace CSV: unexpected header at line " +
                                            std::to_string(lineno));
            header_seen = true;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8)
            throw std::invalid_argument("trace CSV: expected 8 cells at line " +
                                        std::to_string(lineno));
        PopulationSample s;
        s.t = std::stod(cells[0]);
        s.rho00 = std::stod(cells[1]);
        s.rho11 = std::stod(cells[2]);
        s.rho22 = std::stod(cells[3]);
        s.rhoXX = std::stod(cells[4]);
        s.source = source_from_string(cells[5]);
        s.run = std::stoi(cells[6]);
        s.shots = std::stol(cells[7]);
        trace.samples.push_back(s);
    }
    if (!header_seen) throw std::invalid_argument("trace CSV: missing header");
    return trace;
}

} // namespace qhe
