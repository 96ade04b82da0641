#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "engine_circuit.hpp"
#include "gem.hpp"
#include "lindblad.hpp"
#include "noise.hpp"
#include "params.hpp"
#include "rate_model.hpp"
#include "register.hpp"
#include "sampling.hpp"
#include "trace.hpp"

namespace qhe {

/// Malformed configuration or missing input; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline int thread_budget() {
    if (const char* env = std::getenv("QHE_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Run fn(0..n-1) on up to QHE_THREADS workers. Results must go into
/// preallocated per-index slots so the outcome is independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(thread_budget()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw ConfigError("cannot open file: " + p.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write file: " + p.string());
    os << content;
    if (!os) throw std::runtime_error("short write: " + p.string());
}

inline nlohmann::json parse_json_file(const std::filesystem::path& p) {
    try {
        return nlohmann::json::parse(read_text_file(p));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed JSON in " + p.string() + ": " + e.what());
    }
}

inline void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// seed-path tags, one per sampling context
constexpr std::uint64_t kSimulateTag = 1;
constexpr std::uint64_t kExperimentTag = 2;
constexpr std::uint64_t kCalibrationTag = 3;

} // namespace detail

/// Time grid of a run: circuit evaluations at multiples of t_increment,
/// theory curves at a dense 0.05 step, both ending at t_max.
struct GridSpec {
    double t_max = 5.0;
    double t_increment = 0.5;

    void validate() const {
        if (!std::isfinite(t_max) || t_max < 0.0) throw ConfigError("grid.t_max must be >= 0");
        if (!std::isfinite(t_increment) || t_increment <= 0.0)
            throw ConfigError("grid.t_increment must be > 0");
    }

    std::vector<double> points(double step) const {
        validate();
        std::vector<double> ts = {0.0};
        for (long i = 1; i * step <= t_max + 1e-9; ++i) ts.push_back(i * step);
        return ts;
    }
    std::vector<double> circuit_grid() const { return points(t_increment); }
    std::vector<double> dense_grid() const { return points(0.05); }
};

/**
 * One experiment configuration. The same document drives all pipeline
 * stages, so their outputs share a config hash and can be merged by
 * cmd_report.
 */
struct RunConfig {
    EngineParams engine;
    GridSpec grid;
    int n_steps = 2;
    long shots = 8192;
    int runs = 5;
    std::uint64_t seed = 20240819;
    std::optional<NoiseModel> noise;
    int initial_state = 0;
    PQubitMode p_qubit_mode = PQubitMode::ReprepareEachStep;
    int calibration_repeats = 1;

    void validate() const {
        try {
            engine.validate();
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        grid.validate();
        if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
        if (shots < 1) throw ConfigError("shots must be >= 1");
        if (runs < 1) throw ConfigError("runs must be >= 1");
        if (initial_state < 0 || initial_state > 2)
            throw ConfigError("initial_state must be eps0, eps1 or eps2");
        if (calibration_repeats < 1) throw ConfigError("calibration_repeats must be >= 1");
        if (noise) {
            try {
                noise->validate();
            } catch (const std::exception& e) {
                throw ConfigError(e.what());
            }
        }
    }
};

inline std::string initial_state_name(int i) {
    switch (i) {
        case 0: return "eps0";
        case 1: return "eps1";
        case 2: return "eps2";
    }
    throw std::logic_error("initial_state_name: bad index");
}

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json e;
    e["omega0"] = c.engine.omega0;
    e["omega1"] = c.engine.omega1;
    e["omega2"] = c.engine.omega2;
    e["lambda"] = c.engine.lambda;
    e["omega_drive"] = c.engine.omega_drive;
    e["beta_h"] = c.engine.beta_h;
    e["beta_c"] = c.engine.beta_c;
    e["gamma_h20"] = c.engine.gamma_h20;
    e["gamma_c10"] = c.engine.gamma_c10;
    e["gamma_h10"] = c.engine.gamma_h10;
    e["gamma_c20"] = c.engine.gamma_c20;

    nlohmann::json j;
    j["engine"] = e;
    j["grid"] = {{"t_max", c.grid.t_max}, {"t_increment", c.grid.t_increment}};
    j["n_steps"] = c.n_steps;
    j["shots"] = c.shots;
    j["runs"] = c.runs;
    j["seed"] = c.seed;
    j["initial_state"] = initial_state_name(c.initial_state);
    j["p_qubit_mode"] = std::string(to_string(c.p_qubit_mode));
    j["calibration_repeats"] = c.calibration_repeats;
    j["noise"] = c.noise ? to_json(*c.noise) : nlohmann::json(nullptr);
    return j;
}

/// FNV-1a 64 over the canonical (key-sorted, defaults-materialized) JSON
/// form; embedded in every output file.
inline std::string config_hash(const RunConfig& c) {
    return detail::hex64(detail::fnv1a64(to_json(c).dump()));
}

namespace detail {

inline int parse_initial_state(const nlohmann::json& j) {
    if (j.is_number_integer()) {
        const int v = j.get<int>();
        if (v >= 0 && v <= 2) return v;
        throw ConfigError("initial_state must be 0..2 or eps0..eps2");
    }
    const std::string s = j.get<std::string>();
    for (int v = 0; v < 3; ++v)
        if (s == initial_state_name(v)) return v;
    throw ConfigError("initial_state must be eps0, eps1 or eps2");
}

} // namespace detail

/**
 * Parse a RunConfig document. `base_dir` resolves a noise file reference
 * given as a relative path. Unknown keys are rejected so typos fail loudly.
 */
inline RunConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = ".") {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    detail::require_keys(j,
                         {"engine", "grid", "n_steps", "shots", "runs", "seed", "noise",
                          "initial_state", "p_qubit_mode", "calibration_repeats", "omega_drive"},
                         "config");
    RunConfig c;
    try {
        if (j.contains("engine")) {
            const auto& e = j.at("engine");
            detail::require_keys(e,
                                 {"omega0", "omega1", "omega2", "lambda", "omega_drive", "beta_h",
                                  "beta_c", "gamma_h20", "gamma_c10", "gamma_h10", "gamma_c20"},
                                 "config.engine");
            c.engine.omega0 = e.value("omega0", c.engine.omega0);
            c.engine.omega1 = e.value("omega1", c.engine.omega1);
            c.engine.omega2 = e.value("omega2", c.engine.omega2);
            c.engine.lambda = e.value("lambda", c.engine.lambda);
            c.engine.omega_drive = e.value("omega_drive", c.engine.omega_drive);
            c.engine.beta_h = e.value("beta_h", c.engine.beta_h);
            c.engine.beta_c = e.value("beta_c", c.engine.beta_c);
            c.engine.gamma_h20 = e.value("gamma_h20", c.engine.gamma_h20);
            c.engine.gamma_c10 = e.value("gamma_c10", c.engine.gamma_c10);
            c.engine.gamma_h10 = e.value("gamma_h10", c.engine.gamma_h10);
            c.engine.gamma_c20 = e.value("gamma_c20", c.engine.gamma_c20);
        }
        if (j.contains("omega_drive")) c.engine.omega_drive = j.at("omega_drive").get<double>();
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            detail::require_keys(g, {"t_max", "t_increment"}, "config.grid");
            c.grid.t_max = g.value("t_max", c.grid.t_max);
            c.grid.t_increment = g.value("t_increment", c.grid.t_increment);
        }
        c.n_steps = j.value("n_steps", c.n_steps);
        c.shots = j.value("shots", c.shots);
        c.runs = j.value("runs", c.runs);
        c.seed = j.value("seed", c.seed);
        c.calibration_repeats = j.value("calibration_repeats", c.calibration_repeats);
        if (j.contains("initial_state")) c.initial_state = detail::parse_initial_state(j.at("initial_state"));
        if (j.contains("p_qubit_mode"))
            c.p_qubit_mode = p_qubit_mode_from_string(j.at("p_qubit_mode").get<std::string>());
        if (j.contains("noise") && !j.at("noise").is_null()) {
            const auto& n = j.at("noise");
            if (n.is_string()) {
                std::filesystem::path np = n.get<std::string>();
                if (np.is_relative()) np = base_dir / np;
                c.noise = noise_from_json(detail::parse_json_file(np));
            } else {
                c.noise = noise_from_json(n);
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

/// CLI-level field overrides applied after parsing.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> n_steps;
    std::optional<long> shots;
    std::optional<int> runs;
    std::optional<std::string> noise_path;
};

inline RunConfig load_config(const std::filesystem::path& path,
                             const ConfigOverrides& ov = {}) {
    RunConfig c = config_from_json(detail::parse_json_file(path), path.parent_path());
    if (ov.seed) c.seed = *ov.seed;
    if (ov.n_steps) c.n_steps = *ov.n_steps;
    if (ov.shots) c.shots = *ov.shots;
    if (ov.runs) c.runs = *ov.runs;
    if (ov.noise_path) c.noise = noise_from_json(detail::parse_json_file(*ov.noise_path));
    c.validate();
    return c;
}

namespace detail {

inline std::string counts_filename(std::size_t grid_index, int run) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "t%03zu_run%d.json", grid_index, run);
    return buf;
}

inline std::string mitigation_filename(std::size_t grid_index) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "t%03zu.json", grid_index);
    return buf;
}

inline std::string trace_to_csv(const PopulationTrace& trace, const std::string& hash) {
    std::ostringstream os;
    write_csv(os, trace, hash);
    return os.str();
}

inline Eigen::Vector3d basis3(int eps_index) {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    v(eps_index) = 1.0;
    return v;
}

inline std::span<const Eigen::Matrix2d> readout_of(const std::optional<NoiseModel>& noise) {
    static const std::vector<Eigen::Matrix2d> empty;
    return noise ? std::span<const Eigen::Matrix2d>(noise->readout)
                 : std::span<const Eigen::Matrix2d>(empty);
}

} // namespace detail

/**
 * Reference curves: the simplified population model on a dense grid, plus
 * the full master equation when the drive is on. Writes <out>/theory.csv.
 */
inline std::filesystem::path cmd_theory(const RunConfig& cfg, const std::filesystem::path& out) {
    cfg.validate();
    std::filesystem::create_directories(out);
    const auto grid = cfg.grid.dense_grid();
    const Eigen::Vector3d rho0 = detail::basis3(cfg.initial_state);

    PopulationTrace trace = integrate_simplified(cfg.engine, rho0, grid);
    if (cfg.engine.omega_drive > 0.0) {
        DensityMatrix3 r0 = DensityMatrix3::Zero();
        r0(cfg.initial_state, cfg.initial_state) = 1.0;
        trace.append(integrate_full(cfg.engine, r0, grid).populations);
    }

    const auto path = out / "theory.csv";
    detail::write_text_file(path, detail::trace_to_csv(trace, config_hash(cfg)));
    return path;
}

/**
 * Ideal circuit evolution per grid point: one exact row (run 0, shots 0) and
 * `runs` sampled rows. Writes <out>/sim_ideal.csv.
 */
inline std::filesystem::path cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out) {
    cfg.validate();
    std::filesystem::create_directories(out);
    const auto grid = cfg.grid.circuit_grid();
    std::vector<PopulationTrace> parts(grid.size());

    detail::parallel_for(grid.size(), [&](std::size_t i) {
        const StepPlan plan{grid[i], cfg.n_steps, cfg.p_qubit_mode};
        const Circuit c = build_engine_circuit(cfg.engine, plan, cfg.initial_state);
        const RegisterState state = evolve(c, RegisterState(c.n_qubits), nullptr);
        const Eigen::Vector4d exact = marginal_populations(state, c.system_qubits);
        parts[i].samples.push_back(
            {grid[i], exact(0), exact(1), exact(2), exact(3), Source::SimIdeal, 0, 0});
        for (int r = 1; r <= cfg.runs; ++r) {
            const Counts counts = sample_counts(
                state, c.system_qubits, cfg.shots, {},
                derive_seed(cfg.seed, {detail::kSimulateTag, i, static_cast<std::uint64_t>(r)}));
            const Eigen::Vector4d p = populations_from_counts(counts);
            parts[i].samples.push_back(
                {grid[i], p(0), p(1), p(2), p(3), Source::SimIdeal, r, cfg.shots});
        }
    });

    PopulationTrace trace;
    for (const auto& part : parts) trace.append(part);
    const auto path = out / "sim_ideal.csv";
    detail::write_text_file(path, detail::trace_to_csv(trace, config_hash(cfg)));
    return path;
}

/**
 * Noisy run: evolve under the configured NoiseModel, write the exact
 * (infinite-shot, readout-perturbed) row plus `runs` sampled rows per grid
 * point, and persist each run's Counts under <out>/counts/. Writes
 * <out>/sim_noisy.csv.
 */
inline std::filesystem::path cmd_experiment(const RunConfig& cfg,
                                            const std::filesystem::path& out) {
    cfg.validate();
    std::filesystem::create_directories(out / "counts");
    const auto grid = cfg.grid.circuit_grid();
    const std::string hash = config_hash(cfg);
    const NoiseModel* noise = cfg.noise ? &*cfg.noise : nullptr;

    std::vector<PopulationTrace> parts(grid.size());
    std::vector<std::vector<std::pair<std::string, std::string>>> count_files(grid.size());

    detail::parallel_for(grid.size(), [&](std::size_t i) {
        const StepPlan plan{grid[i], cfg.n_steps, cfg.p_qubit_mode};
        const Circuit c = build_engine_circuit(cfg.engine, plan, cfg.initial_state);
        const RegisterState state = evolve(c, RegisterState(c.n_qubits), noise);
        const Eigen::Vector4d exact = apply_readout(
            marginal_populations(state, c.system_qubits), detail::readout_of(cfg.noise));
        parts[i].samples.push_back(
            {grid[i], exact(0), exact(1), exact(2), exact(3), Source::SimNoisy, 0, 0});
        for (int r = 1; r <= cfg.runs; ++r) {
            const std::uint64_t seed = derive_seed(
                cfg.seed, {detail::kExperimentTag, i, static_cast<std::uint64_t>(r)});
            const Counts counts = sample_counts(state, c.system_qubits, cfg.shots,
                                                detail::readout_of(cfg.noise), seed);
            const Eigen::Vector4d p = populations_from_counts(counts);
            parts[i].samples.push_back(
                {grid[i], p(0), p(1), p(2), p(3), Source::SimNoisy, r, cfg.shots});
            nlohmann::json cj = to_json(counts);
            cj["t"] = grid[i];
            cj["grid_index"] = i;
            cj["run"] = r;
            cj["seed"] = seed;
            cj["config_hash"] = hash;
            count_files[i].emplace_back(detail::counts_filename(i, r), cj.dump(2) + "\n");
        }
    });

    PopulationTrace trace;
    for (const auto& part : parts) trace.append(part);
    for (const auto& files : count_files)
        for (const auto& [name, content] : files)
            detail::write_text_file(out / "counts" / name, content);

    const auto path = out / "sim_noisy.csv";
    detail::write_text_file(path, detail::trace_to_csv(trace, hash));
    return path;
}

/**
 * GEM pass: average the persisted runs per grid point, rebuild calibration
 * circuits and the response matrix under the same noise and seed discipline,
 * and solve for the calibrated distributions. Reads <raw>/counts/, writes
 * <out>/sim_mitigated.csv and per-point JSON under <out>/mitigation/.
 */
inline std::filesystem::path cmd_mitigate(const RunConfig& cfg, const std::filesystem::path& raw,
                                          const std::filesystem::path& out) {
    cfg.validate();
    std::filesystem::create_directories(out / "mitigation");
    const auto grid = cfg.grid.circuit_grid();
    const std::string hash = config_hash(cfg);
    const NoiseModel* noise = cfg.noise ? &*cfg.noise : nullptr;

    // averaged raw distributions from the experiment's counts files
    std::vector<Eigen::Vector4d> v(grid.size(), Eigen::Vector4d::Zero());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (int r = 1; r <= cfg.runs; ++r) {
            const auto path = raw / "counts" / detail::counts_filename(i, r);
            if (!std::filesystem::exists(path))
                throw ConfigError("missing counts file: " + path.string());
            const nlohmann::json cj = detail::parse_json_file(path);
            if (cj.contains("config_hash") && cj.at("config_hash").get<std::string>() != hash)
                throw ConfigError("counts file " + path.string() +
                                  " was produced by a different config");
            Counts counts;
            try {
                counts = counts_from_json(cj);
            } catch (const std::exception& e) {
                throw ConfigError("bad counts file " + path.string() + ": " + e.what());
            }
            v[i] += populations_from_counts(counts);
        }
        v[i] /= static_cast<double>(cfg.runs);
    }

    std::vector<PopulationSample> rows(grid.size());
    std::vector<nlohmann::json> sidecars(grid.size());

    detail::parallel_for(grid.size(), [&](std::size_t i) {
        const StepPlan plan{grid[i], cfg.n_steps, cfg.p_qubit_mode};
        const Circuit engine = build_engine_circuit(cfg.engine, plan, cfg.initial_state);
        const auto [c1, c2] = build_calibration_circuits(engine);

        const CircuitEval eval = [&](const Circuit& cc, long shots,
                                     std::uint64_t seed) -> Eigen::Vector4d {
            const RegisterState state = evolve(cc, RegisterState(cc.n_qubits), noise);
            const auto readout = detail::readout_of(cfg.noise);
            if (shots == 0)
                return apply_readout(marginal_populations(state, cc.system_qubits), readout);
            Eigen::Vector4d acc = Eigen::Vector4d::Zero();
            const int reps = cfg.runs * cfg.calibration_repeats;
            for (int r = 0; r < reps; ++r)
                acc += counts_to_probs(
                    sample_counts(state, cc.system_qubits, shots, readout,
                                  derive_seed(seed, {static_cast<std::uint64_t>(r)})));
            return acc / reps;
        };

        const CalibrationMatrix cm = build_calibration_matrix(
            eval, c1, c2, cfg.shots, derive_seed(cfg.seed, {detail::kCalibrationTag, i}));
        const MitigationResult res = mitigate(v[i], cm);

        rows[i] = {grid[i], res.x(0), res.x(1), res.x(2), res.x(3),
                   Source::SimMitigated, 0, cfg.shots * cfg.runs};
        nlohmann::json sj;
        sj["t"] = grid[i];
        sj["grid_index"] = i;
        sj["config_hash"] = hash;
        sj["calibration"] = to_json(cm);
        sj["result"] = to_json(res);
        sidecars[i] = std::move(sj);
    });

    PopulationTrace trace;
    trace.samples = rows;
    for (std::size_t i = 0; i < grid.size(); ++i)
        detail::write_text_file(out / "mitigation" / detail::mitigation_filename(i),
                                sidecars[i].dump(2) + "\n");
    const auto path = out / "sim_mitigated.csv";
    detail::write_text_file(path, detail::trace_to_csv(trace, hash));
    return path;
}

namespace detail {

inline bool same_grid(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-9) return false;
    return true;
}

inline bool subgrid_of(const std::vector<double>& sub, const std::vector<double>& super) {
    std::size_t k = 0;
    for (double t : sub) {
        while (k < super.size() && super[k] < t - 1e-9) ++k;
        if (k == super.size() || std::abs(super[k] - t) > 1e-9) return false;
    }
    return true;
}

inline std::vector<double> distinct_times(const std::vector<PopulationSample>& rows) {
    std::vector<double> ts;
    for (const auto& r : rows) ts.push_back(r.t);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(),
                         [](double a, double b) { return std::abs(a - b) <= 1e-9; }),
             ts.end());
    return ts;
}

} // namespace detail

/**
 * Merge per-source traces into per-figure CSVs. The report config maps panel
 * names to trace files; every file in a panel must carry the same config
 * hash, circuit-derived sources must share one grid, and theory sources must
 * cover it. Writes <out>/<panel>.csv for each panel plus <out>/manifest.json.
 */
inline std::vector<std::filesystem::path> cmd_report(const std::filesystem::path& report_config,
                                                     const std::filesystem::path& out) {
    const nlohmann::json j = detail::parse_json_file(report_config);
    if (!j.is_object() || !j.contains("panels") || !j.at("panels").is_object())
        throw ConfigError("report config must contain a 'panels' object");
    detail::require_keys(j, {"panels"}, "report config");
    const auto base = report_config.parent_path();
    std::filesystem::create_directories(out);

    std::vector<std::filesystem::path> outputs;
    nlohmann::json manifest;
    manifest["panels"] = nlohmann::json::object();

    for (const auto& [panel, files] : j.at("panels").items()) {
        if (!files.is_array() || files.empty())
            throw ConfigError("panel '" + panel + "' must list at least one trace file");
        if (panel.find_first_not_of(
                "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") !=
            std::string::npos)
            throw ConfigError("panel name '" + panel + "' must be a plain file stem");

        std::map<Source, std::vector<PopulationSample>> by_source;
        std::optional<std::string> panel_hash;
        std::vector<std::string> inputs;
        for (const auto& f : files) {
            std::filesystem::path p = f.get<std::string>();
            inputs.push_back(p.string());
            if (p.is_relative()) p = base / p;
            if (!std::filesystem::exists(p))
                throw ConfigError("missing trace file: " + p.string());
            std::istringstream is(detail::read_text_file(p));
            std::optional<std::string> hash;
            PopulationTrace trace;
            try {
                trace = read_csv(is, &hash);
            } catch (const std::exception& e) {
                throw ConfigError("bad trace file " + p.string() + ": " + e.what());
            }
            if (!hash) throw ConfigError("trace file lacks a config hash: " + p.string());
            if (panel_hash && *panel_hash != *hash)
                throw ConfigError("panel '" + panel + "' mixes config hashes (" + *panel_hash +
                                  " vs " + *hash + " in " + p.string() + ")");
            panel_hash = hash;
            for (const auto& s : trace.samples) by_source[s.source].push_back(s);
        }

        // grid consistency: circuit sources share one grid, theory covers it
        std::optional<std::vector<double>> circuit_grid;
        for (const auto& [src, rows] : by_source) {
            if (src == Source::Theory || src == Source::TheoryFull) continue;
            const auto ts = detail::distinct_times(rows);
            if (!circuit_grid) circuit_grid = ts;
            else if (!detail::same_grid(*circuit_grid, ts))
                throw ConfigError("panel '" + panel + "': sources disagree on the time grid");
        }
        if (circuit_grid) {
            for (const auto& [src, rows] : by_source) {
                if (src != Source::Theory && src != Source::TheoryFull) continue;
                if (!detail::subgrid_of(*circuit_grid, detail::distinct_times(rows)))
                    throw ConfigError("panel '" + panel +
                                      "': theory grid does not cover the circuit grid");
            }
        }

        PopulationTrace merged;
        for (const auto& [src, rows] : by_source) {
            auto sorted = rows;
            std::stable_sort(sorted.begin(), sorted.end(),
                             [](const PopulationSample& a, const PopulationSample& b) {
                                 if (a.t != b.t) return a.t < b.t;
                                 return a.run < b.run;
                             });
            merged.samples.insert(merged.samples.end(), sorted.begin(), sorted.end());
        }

        const auto path = out / (panel + ".csv");
        detail::write_text_file(path, detail::trace_to_csv(merged, *panel_hash));
        outputs.push_back(path);
        manifest["panels"][panel] = {{"config_hash", *panel_hash},
                                     {"inputs", inputs},
                                     {"output", path.filename().string()},
                                     {"rows", merged.samples.size()}};
    }

    const auto mpath = out / "manifest.json";
    detail::write_text_file(mpath, manifest.dump(2) + "\n");
    outputs.push_back(mpath);
    return outputs;
}

} // namespace qhe
