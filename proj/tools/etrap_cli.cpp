// etrap: batch front-end. Subcommands: run, sweep, budget, fit.
// Exit codes: 0 success, 1 usage, 2 config, 3 physics/fit failure.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "etrap/analysis.hpp"
#include "etrap/config.hpp"
#include "etrap/sequence.hpp"
#include "etrap/trace_io.hpp"

namespace fs = std::filesystem;
using namespace etrap;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPhysics = 3;

struct CommonOpts {
    std::string out_dir;
    std::int64_t seed_override = -1;
    unsigned jobs = 1;
    std::string format = "both";  // csv | json | both
};

std::string out_base(const CommonOpts& opts, const std::string& config_path,
                     const std::string& suffix) {
    const fs::path cfg(config_path);
    const fs::path dir = opts.out_dir.empty() ? cfg.parent_path() : fs::path(opts.out_dir);
    if (!opts.out_dir.empty()) fs::create_directories(dir);
    return (dir / (cfg.stem().string() + suffix)).string();
}

void write_trace_outputs(const Trace& trace, const std::string& base,
                         const std::string& format) {
    if (format == "csv" || format == "both") write_trace_csv_file(trace, base + ".csv");
    if (format == "json" || format == "both") write_trace_json_file(trace, base + ".json");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text << '\n';
}

RunConfig load_config_or_rethrow(const std::string& path) {
    RunConfig cfg = load_run_config(path);
    return cfg;
}

Trace execute_run(const RunConfig& cfg, std::int64_t seed_override) {
    const std::uint64_t seed =
        seed_override >= 0 ? static_cast<std::uint64_t>(seed_override) : cfg.seed;
    Trace trace = run_sequence(cfg.program, make_run_setup(cfg), seed);
    trace.meta.config_digest = cfg.digest;
    return trace;
}

Trace execute_sweep(const RunConfig& cfg, std::int64_t seed_override) {
    const std::uint64_t seed =
        seed_override >= 0 ? static_cast<std::uint64_t>(seed_override) : cfg.seed;
    Trace trace = sweep_com_frequency(cfg.program, make_run_setup(cfg), seed);
    trace.meta.config_digest = cfg.digest;
    return trace;
}

// Fan a per-config action out over a small thread pool; each config is
// fully isolated. Returns the worst exit code seen.
int for_each_config(const std::vector<std::string>& paths, unsigned jobs,
                    const std::function<int(const std::string&)>& action) {
    if (paths.size() <= 1 || jobs <= 1) {
        int rc = 0;
        for (const auto& p : paths) rc = std::max(rc, action(p));
        return rc;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<int> rc{0};
    std::vector<std::thread> pool;
    const unsigned n_threads = std::min<unsigned>(jobs, paths.size());
    for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= paths.size()) return;
                const int code = action(paths[i]);
                int expected = rc.load();
                while (code > expected && !rc.compare_exchange_weak(expected, code)) {}
            }
        });
    }
    for (auto& th : pool) th.join();
    return rc.load();
}

std::mutex g_print_mutex;

int classify(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    return kExitPhysics;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"etrap - electron Paul-trap readout simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    CommonOpts opts;
    app.add_option("--out", opts.out_dir, "Directory for output files (default: beside config)");
    app.add_option("--seed", opts.seed_override, "Override the config seed");
    app.add_option("--jobs", opts.jobs, "Parallel fan-out over multiple configs")
        ->check(CLI::Range(1u, 256u));
    app.add_option("--format", opts.format, "Trace output format")
        ->check(CLI::IsMember({"csv", "json", "both"}));

    std::vector<std::string> config_paths;
    bool fit_tau = false;
    auto* cmd_run = app.add_subcommand("run", "Execute a zero-span sequence from a config");
    cmd_run->add_option("config", config_paths, "Config file(s)")->required();
    cmd_run->add_flag("--fit-tau", fit_tau, "Fit an exponential decay after the loading event");

    std::vector<std::string> sweep_paths;
    auto* cmd_sweep =
        app.add_subcommand("sweep", "Execute a frequency sweep and fit the spectrum");
    cmd_sweep->add_option("config", sweep_paths, "Config file(s)")->required();

    std::string budget_path;
    auto* cmd_budget = app.add_subcommand("budget", "Report the filter-chain budget");
    cmd_budget->add_option("config", budget_path, "Config file")->required();

    std::string fit_trace_path, fit_model = "exp";
    std::vector<double> fit_window;
    auto* cmd_fit = app.add_subcommand("fit", "Fit a stored trace");
    cmd_fit->add_option("trace", fit_trace_path, "Trace CSV file")->required();
    cmd_fit->add_option("--model", fit_model, "Fit model")
        ->check(CLI::IsMember({"exp", "gauss"}));
    cmd_fit->add_option("--window", fit_window, "Fit window start/end [s]")->expected(2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (cmd_run->parsed()) {
            return for_each_config(config_paths, opts.jobs, [&](const std::string& path) {
                try {
                    const RunConfig cfg = load_config_or_rethrow(path);
                    const Trace trace = execute_run(cfg, opts.seed_override);
                    const std::string base = out_base(opts, path, "_trace");
                    write_trace_outputs(trace, base, opts.format);
                    if (cfg.potential_fit)
                        write_text(out_base(opts, path, "_potential_fit") + ".json",
                                   potential_fit_report(*cfg.potential_fit));
                    double peak = 0.0;
                    for (const double v : trace.y) peak = std::max(peak, v);
                    std::string tau_note;
                    if (fit_tau) {
                        // Start past the acquisition window that straddles
                        // the loading instant.
                        const double t_fit0 =
                            cfg.program.loading.time_s + cfg.program.loading.duration_s +
                            2.0 * cfg.program.acquisition.sample_interval_s;
                        const DecayFit fit = fit_exponential_decay(
                            trace, {t_fit0, cfg.program.end_s()});
                        write_text(out_base(opts, path, "_decay_fit") + ".json",
                                   decay_fit_report(fit));
                        char buf[64];
                        std::snprintf(buf, sizeof buf, ", tau = %.4g s", fit.time_constant);
                        tau_note = buf;
                    }
                    std::lock_guard<std::mutex> lock(g_print_mutex);
                    std::printf("%s: %zu samples, peak %.4g W (%.2f dBm)%s -> %s\n",
                                path.c_str(), trace.y.size(), peak,
                                to_power_reading(peak).dbm, tau_note.c_str(), base.c_str());
                    return 0;
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(g_print_mutex);
                    std::fprintf(stderr, "error: %s\n", e.what());
                    return classify(e);
                }
            });
        }

        if (cmd_sweep->parsed()) {
            return for_each_config(sweep_paths, opts.jobs, [&](const std::string& path) {
                try {
                    const RunConfig cfg = load_config_or_rethrow(path);
                    const Trace spectrum = execute_sweep(cfg, opts.seed_override);
                    const std::string base = out_base(opts, path, "_spectrum");
                    write_trace_outputs(spectrum, base, opts.format);
                    for (const auto& w : spectrum.meta.warnings)
                        std::fprintf(stderr, "warning: %s: %s\n", path.c_str(), w.c_str());
                    std::string fit_note = "no fit";
                    try {
                        const GaussianFit fit = fit_gaussian(spectrum);
                        write_text(out_base(opts, path, "_gauss_fit") + ".json",
                                   gaussian_fit_report(fit));
                        char buf[96];
                        std::snprintf(buf, sizeof buf, "center %.4f MHz, fwhm %.3f MHz",
                                      fit.center / 1e6, fit.fwhm() / 1e6);
                        fit_note = buf;
                    } catch (const FitError& e) {
                        std::fprintf(stderr, "warning: %s: spectrum fit failed: %s\n",
                                     path.c_str(), e.what());
                    }
                    std::lock_guard<std::mutex> lock(g_print_mutex);
                    std::printf("%s: %zu-point spectrum, %s -> %s\n", path.c_str(),
                                spectrum.y.size(), fit_note.c_str(), base.c_str());
                    return 0;
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(g_print_mutex);
                    std::fprintf(stderr, "error: %s\n", e.what());
                    return classify(e);
                }
            });
        }

        if (cmd_budget->parsed()) {
            const RunConfig cfg = load_config_or_rethrow(budget_path);
            std::printf("filter chain (suppression at trap frequency / transmission at readout):\n");
            for (const auto& s : cfg.chain.stages)
                std::printf("  %-24s %6.1f dB   %6.1f dB\n", s.name.c_str(), s.suppression_dB,
                            s.transmission_dB);
            std::printf("post-chain gain: %.1f dB\n", cfg.chain.gain_dB);
            std::printf("total suppression at trap frequency: %.1f dB\n",
                        filter_budget(cfg.chain));
            return 0;
        }

        if (cmd_fit->parsed()) {
            const Trace trace = read_trace_csv_file(fit_trace_path);
            const fs::path tp(fit_trace_path);
            const fs::path dir =
                opts.out_dir.empty() ? tp.parent_path() : fs::path(opts.out_dir);
            if (!opts.out_dir.empty()) fs::create_directories(dir);
            const std::string base = (dir / tp.stem()).string();
            if (fit_model == "exp") {
                const std::pair<double, double> window =
                    fit_window.size() == 2 ? std::pair{fit_window[0], fit_window[1]}
                                           : std::pair{trace.x.front(), trace.x.back()};
                const DecayFit fit = fit_exponential_decay(trace, window);
                const std::string report = decay_fit_report(fit);
                write_text(base + "_exp_fit.json", report);
                std::printf("%s\n", report.c_str());
            } else {
                const GaussianFit fit = fit_gaussian(trace);
                const std::string report = gaussian_fit_report(fit);
                write_text(base + "_gauss_fit.json", report);
                std::printf("%s\n", report.c_str());
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitPhysics;
    }
    return kExitUsage;
}
