#include "cobol/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cobol/records.hpp"

namespace cobol {

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
    if (!std::isfinite(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

const Benchmark* find_benchmark(const std::string& name) {
    const auto names = benchmark_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) return nullptr;
    return &benchmark(name);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

MetricSeries compute_metrics(const RunRecord& record, const Benchmark* bench) {
    MetricSeries m;
    m.has_optimum = bench != nullptr;
    double best = std::numeric_limits<double>::infinity();
    if (bench)
        for (const auto& x : record.init_points) best = std::min(best, (*bench)(x) - bench->f_star);
    double cum = 0.0;
    int q = 0;
    for (const auto& s : record.steps) {
        m.t.push_back(s.t);
        if (s.queried) ++q;
        m.queries.push_back(q);
        m.total_overhead_ms += s.overhead_ms;
        if (bench) {
            if (s.evaluated) {
                const double gap = (*bench)(s.x) - bench->f_star;
                cum += gap;
                best = std::min(best, gap);
            }
            m.sr.push_back(best);
            m.regret.push_back(cum);
        }
    }
    return m;
}

MetricSeries compute_metrics(const RunRecord& record) {
    return compute_metrics(record, find_benchmark(record.benchmark));
}

std::string run_id_for(const std::string& benchmark, Method method, double accuracy, std::uint64_t seed) {
    std::ostringstream os;
    os << benchmark << "_" << to_string(method) << "_a" << accuracy << "_s" << seed;
    return os.str();
}

SyntheticOracle synthetic_oracle(const Benchmark& bench, double accuracy, std::uint64_t seed) {
    return SyntheticOracle(bench.f,
                           SyntheticExpert(accuracy, bench.f_star, bench.f_max(), derive_seed(seed, streams::expert)));
}

RunRecord run_single(const std::string& name, Method method, double accuracy, std::uint64_t seed, int horizon,
                     const EngineConfig& config) {
    const Benchmark& bench = benchmark(name);
    SyntheticOracle expert = synthetic_oracle(bench, accuracy, seed);
    // Sampling from the expert's own reject probability; its label stream is untouched.
    const SyntheticOracle& ref = expert;
    std::function<double(const Vec&)> reject;
    if (method == Method::ExpertSampling) reject = [&ref](const Vec& x) { return ref.reject_probability(x); };
    Engine engine(method, bench.box, config, horizon, seed, reject);
    BenchmarkObjective objective(bench.f, config.noise, derive_seed(seed, streams::noise));
    RunRecord rec = drive(engine, [&](const Vec& x) { return objective(x); }, uses_labels(method) ? &expert : nullptr);
    rec.run_id = run_id_for(name, method, accuracy, seed);
    rec.benchmark = name;
    rec.accuracy = accuracy;
    return rec;
}

std::vector<RunRecord> run_experiment(const ExperimentPlan& plan,
                                      const std::function<void(const RunRecord&)>& on_done) {
    benchmark(plan.benchmark);
    plan.config.validate();
    if (plan.horizon < 0) throw std::invalid_argument("run_experiment: negative horizon");
    if (!plan.out_dir.empty()) std::filesystem::create_directories(plan.out_dir);
    std::vector<RunRecord> out;
    for (std::uint64_t seed : plan.seeds) {
        RunRecord rec;
        try {
            rec = run_single(plan.benchmark, plan.method, plan.accuracy, seed, plan.horizon, plan.config);
        } catch (const std::exception& e) {
            rec.run_id = run_id_for(plan.benchmark, plan.method, plan.accuracy, seed);
            rec.method = to_string(plan.method);
            rec.benchmark = plan.benchmark;
            rec.accuracy = plan.accuracy;
            rec.seed = seed;
            rec.horizon = plan.horizon;
            rec.config = plan.config;
            rec.error = e.what();
        }
        if (!plan.out_dir.empty())
            write_jsonl({rec}, (std::filesystem::path(plan.out_dir) / (rec.run_id + ".jsonl")).string());
        if (on_done) on_done(rec);
        out.push_back(std::move(rec));
    }
    return out;
}

std::string metrics_csv(const std::vector<RunRecord>& records) {
    std::string out = "run_id,t,arm,queried,label,y,SR,R,Qg,overhead_ms\n";
    for (const auto& r : records) {
        const MetricSeries m = compute_metrics(r);
        for (std::size_t i = 0; i < r.steps.size(); ++i) {
            const StepRecord& s = r.steps[i];
            out += r.run_id + "," + std::to_string(s.t) + "," + to_string(s.arm) + "," + (s.queried ? "1" : "0") + ",";
            out += (s.label ? std::to_string(*s.label) : "") + ",";
            out += (s.y ? fmt(*s.y) : "") + ",";
            out += (m.has_optimum ? fmt(m.sr[i]) : "") + ",";
            out += (m.has_optimum ? fmt(m.regret[i]) : "") + ",";
            out += std::to_string(m.queries[i]) + "," + fmt(s.overhead_ms) + "\n";
        }
    }
    return out;
}

void export_records(const std::vector<RunRecord>& records, const std::string& format, const std::string& path) {
    if (format == "jsonl")
        write_jsonl(records, path);
    else if (format == "csv")
        write_text(path, metrics_csv(records));
    else
        throw std::invalid_argument("export_records: unknown format " + format);
}

std::vector<RunRecord> import_records(const std::string& path) {
    if (std::filesystem::is_directory(path)) return read_jsonl_dir(path);
    return read_jsonl(path);
}

CurveStats aggregate(const std::vector<MetricSeries>& series, const std::string& metric) {
    CurveStats c;
    std::map<int, std::vector<double>> by_t;
    for (const auto& m : series) {
        for (std::size_t i = 0; i < m.t.size(); ++i) {
            double v;
            if (metric == "sr") {
                if (!m.has_optimum) continue;
                v = m.sr[i];
            } else if (metric == "regret") {
                if (!m.has_optimum) continue;
                v = m.regret[i];
            } else if (metric == "queries") {
                v = m.queries[i];
            } else {
                throw std::invalid_argument("aggregate: unknown metric " + metric);
            }
            if (std::isfinite(v)) by_t[m.t[i]].push_back(v);
        }
        ++c.runs;
    }
    for (const auto& [t, vs] : by_t) {
        const double n = static_cast<double>(vs.size());
        double mean = 0.0;
        for (double v : vs) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : vs) var += (v - mean) * (v - mean);
        c.t.push_back(t);
        c.mean.push_back(mean);
        c.se.push_back(vs.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0);
    }
    return c;
}

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string svg_plot(const std::string& title, const std::string& ylabel,
                     const std::vector<std::pair<std::string, CurveStats>>& curves) {
    const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 50;
    double xmax = 1, ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    for (const auto& [name, c] : curves)
        for (std::size_t i = 0; i < c.t.size(); ++i) {
            xmax = std::max(xmax, static_cast<double>(c.t[i]));
            ymin = std::min(ymin, c.mean[i] - c.se[i]);
            ymax = std::max(ymax, c.mean[i] + c.se[i]);
        }
    if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
    auto px = [&](double x) { return L + (x - 1.0) / std::max(1.0, xmax - 1.0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double yv = ymin + (ymax - ymin) * k / 4.0;
        const double xv = 1.0 + (xmax - 1.0) * k / 4.0;
        s << "<text x=\"" << L - 6 << "\" y=\"" << fmt(py(yv) + 4, "%.2f") << "\" text-anchor=\"end\" font-size=\"11\">"
          << fmt(yv, "%.3g") << "</text>\n";
        s << "<text x=\"" << fmt(px(xv), "%.2f") << "\" y=\"" << H - B + 16
          << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(std::round(xv), "%.0f") << "</text>\n";
    }
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">t</text>\n";
    s << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
      << ")\" text-anchor=\"middle\" font-size=\"12\">" << ylabel << "</text>\n";
    std::size_t k = 0;
    for (const auto& [name, c] : curves) {
        const char* col = kColors[k % 6];
        if (!c.t.empty()) {
            std::ostringstream band, line;
            for (std::size_t i = 0; i < c.t.size(); ++i)
                band << fmt(px(c.t[i]), "%.2f") << "," << fmt(py(c.mean[i] + c.se[i]), "%.2f") << " ";
            for (std::size_t i = c.t.size(); i-- > 0;)
                band << fmt(px(c.t[i]), "%.2f") << "," << fmt(py(c.mean[i] - c.se[i]), "%.2f") << " ";
            for (std::size_t i = 0; i < c.t.size(); ++i)
                line << fmt(px(c.t[i]), "%.2f") << "," << fmt(py(c.mean[i]), "%.2f") << " ";
            s << "<polygon points=\"" << band.str() << "\" fill=\"" << col << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
            s << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << col
              << "\" stroke-width=\"1.8\"/>\n";
        }
        const double ly = T + 18.0 * static_cast<double>(k);
        s << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << W - R + 34 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << name << " (n=" << c.runs
          << ")</text>\n";
        ++k;
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace

std::vector<std::string> write_report(const std::vector<RunRecord>& records, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    // (benchmark, accuracy) -> method -> series
    std::map<std::pair<std::string, double>, std::map<std::string, std::vector<MetricSeries>>> groups;
    for (const auto& r : records) groups[{r.benchmark, r.accuracy}][r.method].push_back(compute_metrics(r));

    std::vector<std::string> written;
    std::string summary = "benchmark,accuracy,method,t,runs,SR_mean,SR_se,R_mean,R_se,Qg_mean,Qg_se\n";
    std::string final_tab = "benchmark,accuracy,method,runs,T,SR_mean,SR_se,R_mean,R_se,Qg_mean,Qg_se,overhead_ms_mean\n";
    for (const auto& [key, methods] : groups) {
        const auto& [bench, acc] = key;
        std::vector<std::pair<std::string, CurveStats>> sr_c, r_c, q_c;
        for (const auto& [method, series] : methods) {
            const CurveStats sr = aggregate(series, "sr"), rg = aggregate(series, "regret"),
                             qg = aggregate(series, "queries");
            sr_c.emplace_back(method, sr);
            r_c.emplace_back(method, rg);
            q_c.emplace_back(method, qg);
            auto at = [](const CurveStats& c, int t, bool se) -> std::string {
                for (std::size_t i = 0; i < c.t.size(); ++i)
                    if (c.t[i] == t) return fmt(se ? c.se[i] : c.mean[i]);
                return "";
            };
            for (int t : qg.t)
                summary += bench + "," + fmt(acc, "%g") + "," + method + "," + std::to_string(t) + "," +
                           std::to_string(qg.runs) + "," + at(sr, t, false) + "," + at(sr, t, true) + "," +
                           at(rg, t, false) + "," + at(rg, t, true) + "," + at(qg, t, false) + "," +
                           at(qg, t, true) + "\n";
            double ov = 0.0;
            for (const auto& m : series) ov += m.total_overhead_ms;
            const int T = qg.t.empty() ? 0 : qg.t.back();
            final_tab += bench + "," + fmt(acc, "%g") + "," + method + "," + std::to_string(qg.runs) + "," +
                         std::to_string(T) + "," + at(sr, T, false) + "," + at(sr, T, true) + "," + at(rg, T, false) +
                         "," + at(rg, T, true) + "," + at(qg, T, false) + "," + at(qg, T, true) + "," +
                         fmt(series.empty() ? 0.0 : ov / static_cast<double>(series.size())) + "\n";
        }
        const std::string stem = bench + "_a" + fmt(acc, "%g");
        const std::string title = bench + ", a = " + fmt(acc, "%g");
        for (const auto& [suffix, label, curves] :
             {std::tuple{"_sr.svg", "simple regret", &sr_c}, std::tuple{"_regret.svg", "cumulative regret", &r_c},
              std::tuple{"_queries.svg", "expert queries", &q_c}}) {
            const auto path = (std::filesystem::path(out_dir) / (stem + suffix)).string();
            write_text(path, svg_plot(title, label, *curves));
            written.push_back(path);
        }
    }
    const auto sp = (std::filesystem::path(out_dir) / "summary.csv").string();
    const auto fp = (std::filesystem::path(out_dir) / "final.csv").string();
    write_text(sp, summary);
    write_text(fp, final_tab);
    written.insert(written.begin(), {sp, fp});
    return written;
}

}  // namespace cobol
