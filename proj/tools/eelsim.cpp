#include <csignal>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "eelsim/error.hpp"
#include "eelsim/report.hpp"
#include "eelsim/scenario.hpp"
#include "eelsim/simulation.hpp"
#include "eelsim/teleop.hpp"

namespace fs = std::filesystem;
using namespace eelsim;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Digital twin of a twelve-vertebra eel robot"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::optional<double> duration;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "eelsim-run";
    std::string timeline;
    auto* run = app.add_subcommand("run", "Simulate a scenario headless and write the run logs");
    run->add_option("scenario", scenario_path, "Scenario file")->required();
    run->add_option("--duration", duration, "Simulated seconds (overrides sim.duration_s)");
    run->add_option("--seed", seed, "Random seed (overrides sim.seed)");
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();
    run->add_option("--timeline", timeline, "Recorded command timeline to replay");

    std::string run_dir;
    auto* report = app.add_subcommand("report", "Summarize a finished run");
    report->add_option("run-dir", run_dir, "Directory written by 'run'")->required();

    teleop::ServiceOptions serve_opts;
    std::string record_dir = "eelsim-session";
    auto* serve = app.add_subcommand("serve", "Run a scenario in paced real time for teleoperation");
    serve->add_option("scenario", scenario_path, "Scenario file")->required();
    serve->add_option("--port", serve_opts.port, "TCP port")->capture_default_str();
    serve->add_option("--host", serve_opts.host, "Bind address")->capture_default_str();
    serve->add_option("--rate-factor", serve_opts.rate_factor, "Simulated seconds per wall second")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    serve->add_option("--stream-rate", serve_opts.stream_rate, "State frames per second")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    serve->add_option("--controller-timeout", serve_opts.controller_timeout,
                      "Idle seconds before control is released (0 disables)")
        ->capture_default_str();
    serve->add_option("--record", record_dir, "Session timeline and run logs")->capture_default_str();

    auto* keys = app.add_subcommand("keys", "List every scenario key with its default");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (*keys) {
            for (const auto& [key, value] : sim::scenario_defaults()) fmt::print("{} = {}\n", key, value);
            return 0;
        }
        if (*report) {
            std::cout << sim::summarize(fs::path(run_dir));
            return 0;
        }

        sim::Scenario scenario = sim::Scenario::load(scenario_path);
        if (duration) {
            if (!(*duration > 0)) throw ConfigError("--duration", "must be > 0");
            scenario.duration = from_seconds(*duration);
        }
        if (seed) scenario.seed = *seed;
        if (!timeline.empty()) scenario.use_timeline(timeline);

        if (*run) {
            sim::run(scenario, out_dir);
            std::cout << sim::summarize(fs::path(out_dir));
            return 0;
        }

        serve_opts.record_dir = record_dir;
        teleop::Service service(scenario, serve_opts);
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        service.start();
        fmt::print("serving on http://{}:{} (rate factor {}), recording to {}\n", serve_opts.host, service.port(),
                   serve_opts.rate_factor, record_dir);
        std::cout.flush();
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        service.stop();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
}
