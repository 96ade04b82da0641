#include <CLI11.hpp>

#include <qhe/qhe.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

nlohmann::json error_json(const char* kind, const std::string& message) {
    return nlohmann::json{{"error", kind}, {"message", message}};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qhe: reference curves, circuit simulation and error mitigation "
                 "for a dissipative three level engine"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::string noise_path;
    std::uint64_t seed = 0;
    int steps = 0;
    long shots = 0;
    int runs = 0;

    auto add_command = [&](const char* name, const char* desc, bool with_overrides) {
        CLI::App* cmd = app.add_subcommand(name, desc);
        cmd->add_option("--config", config, "run configuration (JSON)")->required();
        cmd->add_option("--out", out, "output directory")->required();
        if (with_overrides) {
            cmd->add_option("--seed", seed, "override the master seed");
            cmd->add_option("--steps", steps, "override the engine step count");
            cmd->add_option("--shots", shots, "override shots per run");
            cmd->add_option("--runs", runs, "override the number of runs");
            cmd->add_option("--noise", noise_path, "override the noise model (JSON file)");
        }
        return cmd;
    };

    CLI::App* c_theory = add_command("theory", "integrate the reference model", true);
    CLI::App* c_simulate = add_command("simulate", "run the engine circuit without noise", true);
    CLI::App* c_experiment =
        add_command("experiment", "run the engine circuit under a noise model", true);
    CLI::App* c_mitigate =
        add_command("mitigate", "calibrate and mitigate a prior experiment's counts", true);
    add_command("report", "merge trace files into per-figure CSVs", false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << error_json("usage", e.what()).dump() << std::endl;
        return 2;
    }

    CLI::App* active = app.get_subcommands().front();
    qhe::ConfigOverrides ov;
    if (active->get_option_no_throw("--seed")) {
        if (active->count("--seed")) ov.seed = seed;
        if (active->count("--steps")) ov.n_steps = steps;
        if (active->count("--shots")) ov.shots = shots;
        if (active->count("--runs")) ov.runs = runs;
        if (active->count("--noise")) ov.noise_path = noise_path;
    }

    try {
        std::vector<std::filesystem::path> outputs;
        if (active == c_theory) {
            outputs = {qhe::cmd_theory(qhe::load_config(config, ov), out)};
        } else if (active == c_simulate) {
            outputs = {qhe::cmd_simulate(qhe::load_config(config, ov), out)};
        } else if (active == c_experiment) {
            outputs = {qhe::cmd_experiment(qhe::load_config(config, ov), out)};
        } else if (active == c_mitigate) {
            outputs = {qhe::cmd_mitigate(qhe::load_config(config, ov), out, out)};
        } else {
            outputs = qhe::cmd_report(config, out);
        }
        for (const auto& p : outputs) std::cout << "wrote " << p.string() << '\n';
        return 0;
    } catch (const qhe::ConfigError& e) {
        std::cerr << error_json("config", e.what()).dump() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << error_json("internal", e.what()).dump() << std::endl;
        return 1;
    }
}
