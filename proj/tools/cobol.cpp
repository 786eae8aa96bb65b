#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "cobol/harness.hpp"
#include "cobol/records.hpp"
#include "cobol/service.hpp"

using namespace cobol;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

// "10" means seeds 1..10; "3,5,7" and "4-8" name them.
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    if (s.find_first_of(",-") == std::string::npos) {
        const long n = std::stol(s);
        if (n < 1) throw std::invalid_argument("--seeds: need at least one seed");
        for (long i = 1; i <= n; ++i) out.push_back(static_cast<std::uint64_t>(i));
        return out;
    }
    for (const auto& part : split(s, ',')) {
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            out.push_back(std::stoull(part));
        } else {
            const auto lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
            if (hi < lo) throw std::invalid_argument("--seeds: empty range " + part);
            for (auto i = lo; i <= hi; ++i) out.push_back(i);
        }
    }
    return out;
}

std::vector<double> parse_numbers(const std::string& s) {
    std::vector<double> out;
    for (const auto& p : split(s, ',')) out.push_back(std::stod(p));
    if (out.empty()) throw std::invalid_argument("expected a comma-separated list of numbers");
    return out;
}

EngineConfig load_config(const std::string& path) {
    if (path.empty()) return EngineConfig{};
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path);
    return config_from_json(json::parse(in));
}

struct RunArgs {
    std::string benchmark = "ackley4";
    std::string methods = "cobol";
    std::string accuracies = "1";
    std::string seeds = "10";
    int horizon = 100;
    std::string config;
    std::string out = "runs";
    int jobs = 1;
};

int run_plans(const RunArgs& a) {
    const EngineConfig cfg = load_config(a.config);
    benchmark(a.benchmark);  // fail early on a bad name
    const auto seeds = parse_seeds(a.seeds);
    std::vector<Method> methods;
    for (const auto& m : split(a.methods, ',')) methods.push_back(method_from_string(m));
    const auto accs = parse_numbers(a.accuracies);
    fs::create_directories(a.out);

    struct Job {
        Method method;
        double accuracy;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double acc : accs)
        for (Method m : methods)
            for (auto s : seeds) jobs.push_back({m, acc, s});

    std::atomic<std::size_t> next{0};
    std::atomic<int> failures{0};
    std::mutex print_mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next++;
            if (i >= jobs.size()) return;
            const Job& j = jobs[i];
            const RunRecord r = run_single(a.benchmark, j.method, j.accuracy, j.seed, a.horizon, cfg);
            write_jsonl({r}, (fs::path(a.out) / (r.run_id + ".jsonl")).string());
            const MetricSeries m = compute_metrics(r);
            std::lock_guard<std::mutex> lock(print_mu);
            if (!r.error.empty()) {
                ++failures;
                std::fprintf(stderr, "%s failed at step %zu: %s\n", r.run_id.c_str(), r.steps.size(), r.error.c_str());
            } else {
                std::printf("%s  SR_T=%.6g  queries=%d  %.1fs\n", r.run_id.c_str(), m.sr.empty() ? 0.0 : m.sr.back(),
                            m.queries.empty() ? 0 : m.queries.back(), m.total_overhead_ms / 1000.0);
                std::fflush(stdout);
            }
        }
    };
    std::vector<std::future<void>> pool;
    for (int k = 0; k < std::max(1, a.jobs); ++k) pool.push_back(std::async(std::launch::async, worker));
    for (auto& f : pool) f.get();
    return failures > 0 ? 2 : 0;
}

void add_run_options(CLI::App* cmd, RunArgs& a, bool sweep) {
    cmd->add_option("--benchmark", a.benchmark, "ackley4, holder2, rastrigin1, rastrigin2, michalewicz5, rosenbrock3");
    if (sweep) {
        a.methods = "cobol,vanilla_lcb";
        a.accuracies = "-2,-1,0,1,2";
        cmd->add_option("--methods", a.methods, "comma-separated methods");
        cmd->add_option("--accuracies", a.accuracies, "comma-separated expert accuracies");
    } else {
        cmd->add_option("--method", a.methods, "cobol, cobohl, vanilla_lcb, random, expert_sampling");
        cmd->add_option("--accuracy", a.accuracies, "synthetic expert accuracy a");
    }
    cmd->add_option("--seeds", a.seeds, "count (1..N), list 1,4,9 or range 3-7");
    cmd->add_option("--horizon", a.horizon, "iterations T")->check(CLI::NonNegativeNumber);
    cmd->add_option("--config", a.config, "JSON file of hyperparameters")->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "directory for <run_id>.jsonl files");
    cmd->add_option("--jobs", a.jobs, "runs in parallel")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cobol: expert-guided Bayesian optimization"};
    app.require_subcommand(1);

    RunArgs run_args, sweep_args;
    auto* run = app.add_subcommand("run", "run one method at one accuracy over several seeds");
    add_run_options(run, run_args, false);
    auto* sweep = app.add_subcommand("sweep", "run methods across accuracy levels");
    add_run_options(sweep, sweep_args, true);

    std::string in_path, report_out = "report";
    auto* report = app.add_subcommand("report", "CSV tables and SVG curves from run records");
    report->add_option("--in", in_path, "directory of .jsonl records or a single file")->required();
    report->add_option("--out", report_out, "output directory");

    std::string host = "127.0.0.1", data_dir;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "labelling session service over HTTP");
    serve->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
    serve->add_option("--host", host, "bind address");
    serve->add_option("--data-dir", data_dir, "event-log root (default $COBOL_DATA_DIR or ./sessions)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*run) return run_plans(run_args);
        if (*sweep) return run_plans(sweep_args);
        if (*report) {
            const auto records = fs::is_directory(in_path) ? read_jsonl_dir(in_path) : read_jsonl(in_path);
            if (records.empty()) {
                std::fprintf(stderr, "no run records under %s\n", in_path.c_str());
                return 1;
            }
            for (const auto& f : write_report(records, report_out)) std::printf("%s\n", f.c_str());
            return 0;
        }
        if (*serve) {
            if (data_dir.empty()) {
                const char* env = std::getenv("COBOL_DATA_DIR");
                data_dir = env && *env ? env : "sessions";
            }
            SessionManager mgr(data_dir);
            HttpService http(mgr);
            std::printf("serving on http://%s:%d (data in %s)\n", host.c_str(), port, data_dir.c_str());
            std::fflush(stdout);
            http.run(host, port);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
