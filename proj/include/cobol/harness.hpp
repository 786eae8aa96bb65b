#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cobol/benchmarks.hpp"
#include "cobol/engine.hpp"

namespace cobol {

/// Per-step series of one run. SR counts the initial design; R and the
/// query count cover iteration steps only.
struct MetricSeries {
    std::vector<int> t;
    std::vector<double> sr;      // empty when the optimum is unknown
    std::vector<double> regret;  // empty when the optimum is unknown
    std::vector<int> queries;
    double total_overhead_ms = 0.0;
    bool has_optimum = false;
};

MetricSeries compute_metrics(const RunRecord& record, const Benchmark* bench);
/// Looks the benchmark up by name; unknown names give a series without SR/R.
MetricSeries compute_metrics(const RunRecord& record);

struct ExperimentPlan {
    std::string benchmark;
    Method method = Method::Cobol;
    double accuracy = 1.0;
    std::vector<std::uint64_t> seeds;
    int horizon = 100;
    EngineConfig config;
    std::string out_dir;  // one <run_id>.jsonl per run when non-empty
};

std::string run_id_for(const std::string& benchmark, Method method, double accuracy, std::uint64_t seed);

/// The synthetic expert a benchmark run uses for a given seed.
SyntheticOracle synthetic_oracle(const Benchmark& bench, double accuracy, std::uint64_t seed);

RunRecord run_single(const std::string& benchmark, Method method, double accuracy, std::uint64_t seed,
                     int horizon, const EngineConfig& config);

/// Runs every seed; a failing run keeps its partial record with `error` set.
std::vector<RunRecord> run_experiment(const ExperimentPlan& plan,
                                      const std::function<void(const RunRecord&)>& on_done = {});

/// run_id,t,arm,queried,label,y,SR,R,Qg,overhead_ms
std::string metrics_csv(const std::vector<RunRecord>& records);

/// format is "jsonl" or "csv".
void export_records(const std::vector<RunRecord>& records, const std::string& format, const std::string& path);
std::vector<RunRecord> import_records(const std::string& path);

struct CurveStats {
    std::vector<int> t;
    std::vector<double> mean;
    std::vector<double> se;
    int runs = 0;
};

/// Mean and standard error across runs of one metric ("sr", "regret" or
/// "queries"), aligned on t.
CurveStats aggregate(const std::vector<MetricSeries>& series, const std::string& metric);

/// Writes summary.csv, final.csv and one SVG per (benchmark, accuracy,
/// metric) into out_dir. Output depends only on the records.
std::vector<std::string> write_report(const std::vector<RunRecord>& records, const std::string& out_dir);

}  // namespace cobol
