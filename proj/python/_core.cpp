#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cobol/acquisition.hpp"
#include "cobol/belief.hpp"
#include "cobol/benchmarks.hpp"
#include "cobol/engine.hpp"
#include "cobol/gp.hpp"
#include "cobol/harness.hpp"
#include "cobol/kernel.hpp"
#include "cobol/records.hpp"

namespace py = pybind11;
using namespace cobol;

namespace {

// Configs and records cross the boundary as JSON text; the Python side turns
// them into dicts.
EngineConfig parse_config(const std::string& text) {
    if (text.empty()) return EngineConfig{};
    EngineConfig c = config_from_json(json::parse(text));
    c.validate();
    return c;
}

py::dict metrics_dict(const MetricSeries& m) {
    py::dict d;
    d["t"] = m.t;
    d["sr"] = m.sr;
    d["regret"] = m.regret;
    d["queries"] = m.queries;
    d["total_overhead_ms"] = m.total_overhead_ms;
    d["has_optimum"] = m.has_optimum;
    return d;
}

py::dict interval_dict(const BeliefInterval& iv) {
    py::dict d;
    d["lower"] = iv.lower;
    d["upper"] = iv.upper;
    d["prob_lower"] = iv.prob_lower;
    d["prob_upper"] = iv.prob_upper;
    return d;
}

BeliefDataset make_dataset(const std::vector<Vec>& points, const std::vector<int>& labels) {
    BeliefDataset ds;
    if (points.size() != labels.size()) throw std::invalid_argument("points and labels differ in length");
    for (std::size_t i = 0; i < points.size(); ++i) ds.add(points[i], labels[i]);
    ds.validate();
    return ds;
}

class PyExpert : public ExpertOracle {
public:
    explicit PyExpert(py::function fn) : fn_(std::move(fn)) {}
    int label(const Vec& x, const LabelContext& ctx) override {
        py::gil_scoped_acquire gil;
        return fn_(x, ctx.t, ctx.p_lower, ctx.p_upper).cast<int>();
    }

private:
    py::function fn_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Expert-guided Bayesian optimization core";

    py::class_<KernelConfig>(m, "KernelConfig")
        .def(py::init<>())
        .def(py::init([](std::vector<double> ls, double s) {
                 KernelConfig k{std::move(ls), s};
                 k.validate();
                 return k;
             }),
             py::arg("lengthscales"), py::arg("output_scale") = 1.0)
        .def_static("isotropic", &KernelConfig::isotropic, py::arg("dim"), py::arg("lengthscale"),
                    py::arg("output_scale") = 1.0)
        .def_readwrite("lengthscales", &KernelConfig::lengthscales)
        .def_readwrite("output_scale", &KernelConfig::output_scale)
        .def_property_readonly("dim", &KernelConfig::dim)
        .def("__repr__", [](const KernelConfig& k) {
            std::string s = "KernelConfig(lengthscales=[";
            for (std::size_t i = 0; i < k.lengthscales.size(); ++i)
                s += (i ? ", " : "") + std::to_string(k.lengthscales[i]);
            return s + "], output_scale=" + std::to_string(k.output_scale) + ")";
        });

    m.def("kernel_eval", &kernel_eval, py::arg("x"), py::arg("x2"), py::arg("kernel"));
    m.def("gram_matrix", &gram_matrix, py::arg("X"), py::arg("kernel"));

    py::class_<GPosterior>(m, "GPosterior")
        .def(py::init<KernelConfig, Mat, Vec, double, double, double>(), py::arg("kernel"), py::arg("X"),
             py::arg("y"), py::arg("regularizer"), py::arg("beta") = 1.0, py::arg("bound_f") = 1.0)
        .def("predict",
             [](const GPosterior& p, const Vec& x) {
                 auto r = p.predict(x);
                 return py::make_tuple(r.mean, r.variance);
             })
        .def("lcb", [](const GPosterior& p, const Vec& x) { return p.lcb(x); })
        .def("ucb", [](const GPosterior& p, const Vec& x) { return p.ucb(x); })
        .def("sd", &GPosterior::sd)
        .def_property_readonly("beta", &GPosterior::beta)
        .def_property_readonly("size", &GPosterior::size);

    m.def("beta_f", &beta_f, py::arg("bound_f"), py::arg("sigma"), py::arg("gamma_prev"), py::arg("delta"));

    m.def("sigmoid", &sigmoid);
    m.def("log_likelihood", &log_likelihood, py::arg("Z"), py::arg("labels"));
    m.def("beta1", &beta1, py::arg("epsilon"), py::arg("delta"), py::arg("q"), py::arg("t"), py::arg("bound_g"),
          py::arg("log_cover_proxy") = 0.0);
    m.def(
        "solve_mle",
        [](const std::vector<Vec>& points, const std::vector<int>& labels, double bound_g, const KernelConfig& k) {
            MleResult r = solve_mle(make_dataset(points, labels), bound_g, k);
            return py::make_tuple(r.Z, r.ll);
        },
        py::arg("points"), py::arg("labels"), py::arg("bound_g"), py::arg("kernel"),
        "Latent MLE at the labelled points and its log-likelihood.");
    m.def(
        "g_interval",
        [](const Vec& x, const std::vector<Vec>& points, const std::vector<int>& labels, double bound_g,
           double radius, const KernelConfig& k) {
            BeliefDataset ds = make_dataset(points, labels);
            ConfidenceSetParams p;
            p.norm_bound = bound_g;
            p.beta1 = radius;
            double ll = solve_mle(ds, bound_g, k).ll;
            return interval_dict(g_interval(x, ds, p, k, ll));
        },
        py::arg("x"), py::arg("points"), py::arg("labels"), py::arg("bound_g"), py::arg("radius"),
        py::arg("kernel"));

    m.def("benchmark_names", &benchmark_names);
    m.def("benchmark_eval", &benchmark_eval, py::arg("name"), py::arg("x"));
    m.def(
        "benchmark_info",
        [](const std::string& name) {
            const Benchmark& b = benchmark(name);
            py::dict d;
            d["name"] = b.name;
            d["lower"] = b.box.lower;
            d["upper"] = b.box.upper;
            d["f_star"] = b.f_star;
            if (b.x_star) d["x_star"] = *b.x_star;
            else d["x_star"] = py::none();
            return d;
        },
        py::arg("name"));

    m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stream"));
    m.def("default_config", [] { return config_to_json(EngineConfig{}).dump(); });
    m.def("config_problems", [](const std::string& text) {
        std::vector<std::string> out;
        try {
            config_from_json(json::parse(text));
        } catch (const std::invalid_argument& e) {
            // "invalid config; a: ...; b: ..."
            std::string msg = e.what();
            std::size_t pos = msg.find("; ");
            if (pos == std::string::npos) return std::vector<std::string>{msg};
            for (pos += 2;;) {
                std::size_t next = msg.find("; ", pos);
                out.push_back(msg.substr(pos, next == std::string::npos ? next : next - pos));
                if (next == std::string::npos) break;
                pos = next + 2;
            }
        }
        return out;
    });

    m.def(
        "run_single",
        [](const std::string& bench, const std::string& method, double accuracy, std::uint64_t seed, int horizon,
           const std::string& config) {
            EngineConfig c = parse_config(config);
            Method meth = method_from_string(method);
            RunRecord r;
            {
                py::gil_scoped_release release;
                r = run_single(bench, meth, accuracy, seed, horizon, c);
            }
            return record_to_jsonl(r);
        },
        py::arg("benchmark"), py::arg("method"), py::arg("accuracy"), py::arg("seed"), py::arg("horizon"),
        py::arg("config") = "", "Runs one benchmark trial; returns the record as JSONL text.");

    m.def(
        "optimize",
        [](py::function objective, py::object expert, const Vec& lower, const Vec& upper, const std::string& method,
           int horizon, std::uint64_t seed, const std::string& config) {
            EngineConfig c = parse_config(config);
            Method meth = method_from_string(method);
            if (uses_labels(meth) && expert.is_none())
                throw std::invalid_argument("method " + method + " needs an expert callable");
            std::function<double(const Vec&)> f = [objective](const Vec& x) {
                py::gil_scoped_acquire gil;
                return objective(x).cast<double>();
            };
            Engine engine(meth, DomainBox(lower, upper), c, horizon, seed);
            std::unique_ptr<PyExpert> ex;
            if (!expert.is_none()) ex = std::make_unique<PyExpert>(expert.cast<py::function>());
            RunRecord r;
            {
                py::gil_scoped_release release;
                r = drive(engine, f, ex.get());
            }
            return record_to_jsonl(r);
        },
        py::arg("objective"), py::arg("expert"), py::arg("lower"), py::arg("upper"), py::arg("method") = "cobol",
        py::arg("horizon") = 20, py::arg("seed") = 0, py::arg("config") = "",
        "Minimizes objective(x) on the box. expert(x, t, p_lower, p_upper) returns 0 (accept) or 1 (reject).");

    py::class_<Engine>(m, "Engine")
        .def(py::init([](const std::string& method, const Vec& lower, const Vec& upper, const std::string& config,
                         int horizon, std::uint64_t seed) {
                 return std::make_unique<Engine>(method_from_string(method), DomainBox(lower, upper),
                                                 parse_config(config), horizon, seed);
             }),
             py::arg("method"), py::arg("lower"), py::arg("upper"), py::arg("config") = "", py::arg("horizon") = 20,
             py::arg("seed") = 0)
        .def("advance", &Engine::advance, py::call_guard<py::gil_scoped_release>())
        .def("pending",
             [](const Engine& e) {
                 const Request& r = e.pending();
                 py::dict d;
                 d["kind"] = r.kind == Request::Kind::Label         ? "label"
                             : r.kind == Request::Kind::Observation ? "observation"
                                                                    : "done";
                 d["x"] = r.x;
                 d["t"] = r.t;
                 d["p_lower"] = r.p_lower;
                 d["p_upper"] = r.p_upper;
                 return d;
             })
        .def("submit_label", &Engine::submit_label, py::arg("label"))
        .def("submit_observation", &Engine::submit_observation, py::arg("y"))
        .def_property_readonly("finished", &Engine::finished)
        .def_property_readonly("needs_compute", &Engine::needs_compute)
        .def_property_readonly("t", &Engine::t)
        .def_property_readonly("lambda_", &Engine::lambda)
        .def_property_readonly("bound_g", &Engine::bound_g)
        .def("record_jsonl", [](const Engine& e) { return record_to_jsonl(e.record()); });

    m.def(
        "compute_metrics",
        [](const std::string& jsonl) {
            auto recs = records_from_jsonl(jsonl);
            if (recs.size() != 1) throw std::invalid_argument("expected exactly one record");
            return metrics_dict(compute_metrics(recs.front()));
        },
        py::arg("record_jsonl"));
    m.def(
        "same_trace",
        [](const std::string& a, const std::string& b) {
            auto ra = records_from_jsonl(a);
            auto rb = records_from_jsonl(b);
            if (ra.size() != rb.size()) return false;
            for (std::size_t i = 0; i < ra.size(); ++i)
                if (!ra[i].same_trace(rb[i])) return false;
            return true;
        },
        py::arg("a"), py::arg("b"));
}
