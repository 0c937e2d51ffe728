// qws <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--window <L>] [--boundary ...]

#include "qws/io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw qws::Error(qws::ErrorKind::SchemaError, "cannot read config file " + path, "--config");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Position-dependent two-state quantum walks: simulation, spectra and edge-defect detection"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<long> window;
    std::optional<std::string> boundary;

    for (const char* name : {"simulate", "spectrum", "bands", "dispersion", "eigenfunction", "detect"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "perturbation seed");
        sub->add_option("--window", window, "half-width L of the window [-L, L]");
        sub->add_option("--boundary", boundary, "boundary mode")
            ->check(CLI::IsMember({"periodic", "truncate", "padded"}));
    }

    CLI11_PARSE(app, argc, argv);
    const std::string name = app.get_subcommands().front()->get_name();

    try {
        qws::ExperimentConfig cfg = qws::parse_config(slurp(config_path));
        if (out_dir) cfg.output_dir = *out_dir;
        if (seed) cfg.perturbation.seed = *seed;
        if (window) {
            if (*window < 1) throw qws::Error(qws::ErrorKind::RangeError, "L must be >= 1", "--window");
            cfg.L = *window;
        }
        if (boundary) cfg.boundary = qws::detail::parse_boundary(*boundary, "--boundary");

        const qws::RunResult r = qws::run_subcommand(name, cfg);
        qws::Json files = qws::Json::array();
        for (const auto& f : r.files) files.push_back(f.string());
        std::cout << qws::Json{{"subcommand", name}, {"result", r.summary}, {"files", files}}.dump(2) << "\n";
        return r.exit_code;
    } catch (const qws::Error& e) {
        std::cout << qws::error_json(e).dump(2) << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cout << qws::Json{{"error", "IoError"}, {"message", e.what()}, {"path", ""}}.dump(2) << "\n";
        return 3;
    }
}
