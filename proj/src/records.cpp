#include "cobol/records.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cobol {

namespace {

json vec_json(const Vec& v) { return json(to_std(v)); }
Vec json_vec(const json& j) { return from_std(j.get<std::vector<double>>()); }

template <class T>
json opt_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> json_opt(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace

json config_to_json(const EngineConfig& c) {
    return json{{"eta", c.eta},
                {"lambda0", c.lambda0},
                {"zeta", c.zeta},
                {"g_thr", c.g_thr},
                {"g_thr_scale", c.g_thr_scale},
                {"bound_g0", c.bound_g0},
                {"alpha1", c.alpha1},
                {"radius_rule", c.radius_rule},
                {"log_cover_proxy", c.log_cover_proxy},
                {"delta", c.delta},
                {"bound_f", c.bound_f},
                {"sigma", c.sigma},
                {"noise", c.noise},
                {"r", c.r},
                {"epsilon", c.epsilon},
                {"fit_restarts", c.fit_restarts},
                {"acq_starts", c.acq_starts},
                {"acq_screen", c.acq_screen},
                {"init_observations", c.init_observations},
                {"init_labels", c.init_labels},
                {"window", opt_json(c.window)},
                {"max_doublings", c.max_doublings},
                {"lengthscale0", c.lengthscale0}};
}

EngineConfig config_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    EngineConfig c;
    std::vector<std::string> problems;
    auto num = [&](const char* key, double& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number()) {
            problems.push_back(std::string(key) + ": expected a number");
            return;
        }
        out = j.at(key).get<double>();
    };
    auto integer = [&](const char* key, int& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number_integer()) {
            problems.push_back(std::string(key) + ": expected an integer");
            return;
        }
        out = j.at(key).get<int>();
    };
    num("eta", c.eta);
    num("lambda0", c.lambda0);
    num("zeta", c.zeta);
    num("g_thr", c.g_thr);
    num("bound_g0", c.bound_g0);
    num("alpha1", c.alpha1);
    num("log_cover_proxy", c.log_cover_proxy);
    num("delta", c.delta);
    num("bound_f", c.bound_f);
    num("sigma", c.sigma);
    num("noise", c.noise);
    num("r", c.r);
    num("epsilon", c.epsilon);
    num("lengthscale0", c.lengthscale0);
    integer("fit_restarts", c.fit_restarts);
    integer("acq_starts", c.acq_starts);
    integer("acq_screen", c.acq_screen);
    integer("init_observations", c.init_observations);
    integer("init_labels", c.init_labels);
    integer("max_doublings", c.max_doublings);
    auto str = [&](const char* key, std::string& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_string()) {
            problems.push_back(std::string(key) + ": expected a string");
            return;
        }
        out = j.at(key).get<std::string>();
    };
    str("radius_rule", c.radius_rule);
    str("g_thr_scale", c.g_thr_scale);
    if (j.contains("window") && !j.at("window").is_null()) {
        if (j.at("window").is_number_integer())
            c.window = j.at("window").get<int>();
        else
            problems.push_back("window: expected an integer or null");
    }
    const json known = config_to_json(EngineConfig{});
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) problems.push_back(key + ": unknown key");
    if (problems.empty()) problems = c.problems();
    if (!problems.empty()) {
        std::ostringstream os;
        os << "invalid config";
        for (const auto& p : problems) os << "; " << p;
        throw std::invalid_argument(os.str());
    }
    return c;
}

json step_to_json(const StepRecord& s) {
    return json{{"t", s.t},
                {"arm", to_string(s.arm)},
                {"x", vec_json(s.x)},
                {"queried", s.queried},
                {"label", opt_json(s.label)},
                {"evaluated", s.evaluated},
                {"y", opt_json(s.y)},
                {"z_star", opt_json(s.z_star)},
                {"no_harm", s.no_harm},
                {"handover", s.handover},
                {"lambda", s.lambda},
                {"bound_g", s.bound_g},
                {"p_lower", opt_json(s.p_lower)},
                {"p_upper", opt_json(s.p_upper)},
                {"fallback", s.fallback},
                {"overhead_ms", s.overhead_ms}};
}

StepRecord step_from_json(const json& j) {
    StepRecord s;
    s.t = j.at("t").get<int>();
    s.arm = arm_from_string(j.at("arm").get<std::string>());
    s.x = json_vec(j.at("x"));
    s.queried = j.at("queried").get<bool>();
    s.label = json_opt<int>(j, "label");
    s.evaluated = j.at("evaluated").get<bool>();
    s.y = json_opt<double>(j, "y");
    s.z_star = json_opt<double>(j, "z_star");
    s.no_harm = j.at("no_harm").get<bool>();
    s.handover = j.at("handover").get<bool>();
    s.lambda = j.at("lambda").get<double>();
    s.bound_g = j.at("bound_g").get<double>();
    s.p_lower = json_opt<double>(j, "p_lower");
    s.p_upper = json_opt<double>(j, "p_upper");
    s.fallback = j.at("fallback").get<bool>();
    s.overhead_ms = j.at("overhead_ms").get<double>();
    return s;
}

json header_to_json(const RunRecord& r) {
    json pts = json::array(), lpts = json::array();
    for (const auto& p : r.init_points) pts.push_back(vec_json(p));
    for (const auto& p : r.init_label_points) lpts.push_back(vec_json(p));
    return json{{"schema", r.schema},
                {"type", "header"},
                {"run_id", r.run_id},
                {"method", r.method},
                {"benchmark", r.benchmark},
                {"accuracy", r.accuracy},
                {"seed", r.seed},
                {"T", r.horizon},
                {"config", config_to_json(r.config)},
                {"init_points", pts},
                {"init_values", r.init_values},
                {"init_label_points", lpts},
                {"init_labels", r.init_labels},
                {"error", r.error}};
}

RunRecord header_from_json(const json& j) {
    RunRecord r;
    r.schema = j.at("schema").get<int>();
    if (r.schema != 1) throw std::runtime_error("unsupported record schema " + std::to_string(r.schema));
    r.run_id = j.at("run_id").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.benchmark = j.at("benchmark").get<std::string>();
    r.accuracy = j.at("accuracy").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.horizon = j.at("T").get<int>();
    r.config = config_from_json(j.at("config"));
    for (const auto& p : j.at("init_points")) r.init_points.push_back(json_vec(p));
    r.init_values = j.at("init_values").get<std::vector<double>>();
    for (const auto& p : j.at("init_label_points")) r.init_label_points.push_back(json_vec(p));
    r.init_labels = j.at("init_labels").get<std::vector<int>>();
    r.error = j.value("error", std::string());
    return r;
}

std::string record_to_jsonl(const RunRecord& r) {
    std::string out = header_to_json(r).dump() + "\n";
    for (const auto& s : r.steps) {
        json j = step_to_json(s);
        j["schema"] = 1;
        j["type"] = "step";
        j["run_id"] = r.run_id;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<RunRecord> records_from_jsonl(const std::string& text) {
    std::vector<RunRecord> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            const std::string type = j.at("type").get<std::string>();
            if (type == "header") {
                out.push_back(header_from_json(j));
            } else if (type == "step") {
                const std::string id = j.at("run_id").get<std::string>();
                auto it = std::find_if(out.rbegin(), out.rend(), [&](const RunRecord& r) { return r.run_id == id; });
                if (it == out.rend()) throw std::runtime_error("step before its header");
                it->steps.push_back(step_from_json(j));
            } else {
                throw std::runtime_error("unknown line type '" + type + "'");
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("jsonl line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_jsonl(const std::vector<RunRecord>& records, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& r : records) f << record_to_jsonl(r);
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<RunRecord> read_jsonl(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return records_from_jsonl(ss.str());
}

std::vector<RunRecord> read_jsonl_dir(const std::string& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<RunRecord> out;
    for (const auto& p : files) {
        auto recs = read_jsonl(p.string());
        out.insert(out.end(), recs.begin(), recs.end());
    }
    return out;
}

}  // namespace cobol
