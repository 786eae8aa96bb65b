#include "cobol/service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include "httplib.h"

#include "cobol/benchmarks.hpp"
#include "cobol/harness.hpp"

namespace cobol {

namespace fs = std::filesystem;

SessionSpec SessionSpec::from_json(const json& j) {
    if (!j.is_object()) throw ServiceError(400, "request body must be a JSON object");
    SessionSpec s;
    std::vector<std::string> bad;
    if (j.contains("config")) {
        try {
            s.config = config_from_json(j.at("config"));
        } catch (const std::invalid_argument& e) {
            bad.push_back(std::string("config: ") + e.what());
        }
    }
    if (j.contains("method")) {
        if (!j.at("method").is_string()) {
            bad.push_back("method: expected a string");
        } else {
            s.method = j.at("method").get<std::string>();
            try {
                if (method_from_string(s.method) == Method::ExpertSampling)
                    bad.push_back("method: expert_sampling needs a synthetic expert and is not served");
            } catch (const std::invalid_argument& e) {
                bad.push_back(std::string("method: ") + e.what());
            }
        }
    }
    if (j.contains("objective")) {
        if (j.at("objective").is_string())
            s.objective = j.at("objective").get<std::string>();
        else
            bad.push_back("objective: expected a string");
    }
    bool known = s.objective == "external";
    if (!known) {
        const auto names = benchmark_names();
        known = std::find(names.begin(), names.end(), s.objective) != names.end();
        if (!known) bad.push_back("objective: must be \"external\" or a benchmark name");
    }
    if (j.contains("box")) {
        try {
            const json& b = j.at("box");
            s.box = DomainBox(from_std(b.at("lower").get<std::vector<double>>()),
                              from_std(b.at("upper").get<std::vector<double>>()));
        } catch (const std::exception& e) {
            bad.push_back(std::string("box: ") + e.what());
        }
    } else if (s.objective == "external") {
        bad.push_back("box: required for an external objective");
    }
    if (known && s.objective != "external") {
        if (j.contains("box") && bad.empty()) {
            const DomainBox& bb = benchmark(s.objective).box;
            if (s.box.lower != bb.lower || s.box.upper != bb.upper)
                bad.push_back("box: must match the benchmark domain or be omitted");
        }
        s.box = benchmark(s.objective).box;
    }
    if (j.contains("horizon")) {
        if (j.at("horizon").is_number_integer() && j.at("horizon").get<int>() >= 0)
            s.horizon = j.at("horizon").get<int>();
        else
            bad.push_back("horizon: expected a nonnegative integer");
    }
    if (j.contains("seed")) {
        if (j.at("seed").is_number_unsigned() || (j.at("seed").is_number_integer() && j.at("seed").get<std::int64_t>() >= 0))
            s.seed = j.at("seed").get<std::uint64_t>();
        else
            bad.push_back("seed: expected a nonnegative integer");
    }
    if (j.contains("accuracy")) {
        if (j.at("accuracy").is_number())
            s.accuracy = j.at("accuracy").get<double>();
        else
            bad.push_back("accuracy: expected a number");
    }
    if (j.contains("idempotency_key")) {
        if (j.at("idempotency_key").is_string())
            s.idempotency_key = j.at("idempotency_key").get<std::string>();
        else
            bad.push_back("idempotency_key: expected a string");
    }
    static const std::set<std::string> keys = {"config", "method",   "objective", "box",
                                               "horizon", "seed",   "accuracy",  "idempotency_key"};
    for (const auto& [k, v] : j.items())
        if (!keys.count(k)) bad.push_back(k + ": unknown field");
    if (!bad.empty()) throw ServiceError(400, "invalid session request", bad);
    return s;
}

json SessionSpec::to_json() const {
    return json{{"config", config_to_json(config)},
                {"method", method},
                {"objective", objective},
                {"box", {{"lower", to_std(box.lower)}, {"upper", to_std(box.upper)}}},
                {"horizon", horizon},
                {"seed", seed},
                {"accuracy", accuracy},
                {"idempotency_key", idempotency_key}};
}

namespace {

// Appends one line and forces it to disk before returning.
void durable_append(const std::string& path, const std::string& line) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw std::runtime_error("cannot open event log " + path);
    const std::string buf = line + "\n";
    std::size_t off = 0;
    while (off < buf.size()) {
        const ssize_t n = ::write(fd, buf.data() + off, buf.size() - off);
        if (n < 0) {
            ::close(fd);
            throw std::runtime_error("event log write failed: " + path);
        }
        off += static_cast<std::size_t>(n);
    }
    const int rc = ::fsync(fd);
    ::close(fd);
    if (rc != 0) throw std::runtime_error("event log fsync failed: " + path);
}

std::string new_session_id() {
    static std::mutex mu;
    static std::mt19937_64 rng(std::random_device{}());
    std::lock_guard<std::mutex> lock(mu);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

}  // namespace

struct SessionManager::Session {
    std::string id;
    std::string log_path;
    SessionSpec spec;
    std::unique_ptr<Engine> engine;
    std::optional<BenchmarkObjective> objective;

    std::mutex mu;
    std::condition_variable idle;
    std::string phase = "computing";
    json pending;            // null when absent
    RunRecord history;       // snapshot taken when computing ends
    std::string error;
    std::set<std::string> request_ids;
    std::size_t logged_overheads = 0;
    std::thread worker;

    Session(std::string sid, std::string path, SessionSpec sp) : id(std::move(sid)), log_path(std::move(path)), spec(std::move(sp)) {
        engine = std::make_unique<Engine>(method_from_string(spec.method), spec.box, spec.config, spec.horizon,
                                          spec.seed);
        if (spec.objective != "external") {
            objective.emplace(benchmark(spec.objective).f, spec.config.noise, derive_seed(spec.seed, streams::noise));
        }
    }

    // Runs the engine until it waits on the outside world. Benchmark
    // observations are answered here.
    void compute() {
        for (;;) {
            engine->advance();
            const Request& req = engine->pending();
            if (req.kind == Request::Kind::Observation && objective) {
                engine->submit_observation((*objective)(req.x));
                continue;
            }
            break;
        }
    }

    // Caller holds mu.
    void publish() {
        const Request& req = engine->pending();
        history = engine->record();
        history.run_id = id;
        history.benchmark = spec.objective;
        history.accuracy = spec.accuracy;
        if (!error.empty()) {
            phase = "finished";
            pending = nullptr;
            return;
        }
        switch (req.kind) {
            case Request::Kind::Label: phase = "awaiting_label"; break;
            case Request::Kind::Observation: phase = "awaiting_observation"; break;
            case Request::Kind::Done: phase = "finished"; break;
        }
        if (req.kind == Request::Kind::Done) {
            pending = nullptr;
        } else {
            pending = json{{"x", to_std(req.x)}, {"t", req.t}, {"p_lower", req.p_lower}, {"p_upper", req.p_upper}};
        }
    }

    json summary() const {
        json s{{"steps", history.steps.size()}};
        const MetricSeries m = compute_metrics(history);
        s["queries"] = m.queries.empty() ? 0 : m.queries.back();
        int evals = 0;
        std::optional<double> best_y;
        Vec best_x;
        for (std::size_t i = 0; i < history.init_values.size(); ++i)
            if (!best_y || history.init_values[i] < *best_y) {
                best_y = history.init_values[i];
                best_x = history.init_points[i];
            }
        for (const auto& st : history.steps)
            if (st.evaluated) {
                ++evals;
                if (!best_y || *st.y < *best_y) {
                    best_y = *st.y;
                    best_x = st.x;
                }
            }
        s["evaluations"] = evals;
        s["best_y"] = best_y ? json(*best_y) : json(nullptr);
        s["best_x"] = best_y ? json(to_std(best_x)) : json(nullptr);
        if (m.has_optimum && !m.sr.empty()) s["simple_regret"] = m.sr.back();
        return s;
    }

    json snapshot() const {
        json j{{"session_id", id}, {"phase", phase}};
        if (!pending.is_null()) j["pending"] = pending;
        if (phase == "finished") j["summary"] = summary();
        if (!error.empty()) j["error"] = error;
        return j;
    }
};

SessionManager::SessionManager(std::string data_dir) : dir_(std::move(data_dir)) {
    fs::create_directories(dir_);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir_))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        try {
            load(p.string());
        } catch (const std::exception& e) {
            std::fprintf(stderr, "skipping session log %s: %s\n", p.string().c_str(), e.what());
        }
    }
}

SessionManager::~SessionManager() {
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard<std::mutex> lock(mu_);
        for (auto& [id, s] : sessions_) all.push_back(s);
    }
    for (auto& s : all)
        if (s->worker.joinable()) s->worker.join();
}

void SessionManager::load(const std::string& path) {
    std::ifstream f(path);
    std::string line;
    std::vector<json> events;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        try {
            events.push_back(json::parse(line));
        } catch (const json::exception&) {
            break;  // torn tail from a crash mid-write; everything before it was acknowledged
        }
    }
    if (events.empty() || events.front().value("event", "") != "create") return;
    const json& c = events.front();
    auto s = std::make_shared<Session>(c.at("session_id").get<std::string>(), path,
                                       SessionSpec::from_json(c.at("spec")));
    std::vector<double> overheads;
    try {
        s->compute();
        for (std::size_t i = 1; i < events.size(); ++i) {
            const json& e = events[i];
            const std::string kind = e.value("event", "");
            if (kind == "label") {
                s->engine->submit_label(e.at("label").get<int>());
                s->compute();
            } else if (kind == "observation") {
                s->engine->submit_observation(e.at("y").get<double>());
                s->compute();
            } else if (kind == "overhead") {
                overheads.push_back(e.at("ms").get<double>());
                continue;
            }
            if (e.contains("request_id") && e.at("request_id").is_string())
                s->request_ids.insert(e.at("request_id").get<std::string>());
        }
    } catch (const std::exception& e) {
        s->error = e.what();
    }
    auto& steps = s->engine->record().steps;
    for (std::size_t i = 0; i < std::min(overheads.size(), steps.size()); ++i) steps[i].overhead_ms = overheads[i];
    s->logged_overheads = overheads.size();
    {
        std::lock_guard<std::mutex> lock(s->mu);
        s->publish();
    }
    std::lock_guard<std::mutex> lock(mu_);
    if (!s->spec.idempotency_key.empty()) by_key_[s->spec.idempotency_key] = s->id;
    sessions_[s->id] = s;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
    return it->second;
}

void SessionManager::start_compute(const std::shared_ptr<Session>& s) {
    // Caller holds s->mu and has set phase = "computing".
    if (s->worker.joinable()) s->worker.join();
    s->worker = std::thread([s] {
        std::string err;
        try {
            s->compute();
        } catch (const std::exception& e) {
            err = e.what();
        }
        // Overheads of newly finished steps go to the log so a reload shows the same numbers.
        const auto& steps = s->engine->record().steps;
        try {
            for (std::size_t i = s->logged_overheads; i < steps.size(); ++i)
                durable_append(s->log_path, json{{"event", "overhead"}, {"index", i}, {"ms", steps[i].overhead_ms}}.dump());
            s->logged_overheads = steps.size();
        } catch (const std::exception& e) {
            if (err.empty()) err = e.what();
        }
        std::lock_guard<std::mutex> lock(s->mu);
        if (!err.empty()) s->error = err;
        s->publish();
        s->idle.notify_all();
    });
}

json SessionManager::create(const json& body) {
    SessionSpec spec = SessionSpec::from_json(body);
    std::lock_guard<std::mutex> lock(mu_);
    if (!spec.idempotency_key.empty()) {
        auto it = by_key_.find(spec.idempotency_key);
        if (it != by_key_.end()) {
            auto s = sessions_.at(it->second);
            std::lock_guard<std::mutex> sl(s->mu);
            json j = s->snapshot();
            j["created"] = false;
            return j;
        }
    }
    const std::string id = new_session_id();
    const std::string path = (fs::path(dir_) / (id + ".jsonl")).string();
    std::shared_ptr<Session> s;
    try {
        s = std::make_shared<Session>(id, path, spec);
    } catch (const std::invalid_argument& e) {
        throw ServiceError(400, e.what());
    }
    durable_append(path, json{{"event", "create"}, {"session_id", id}, {"spec", spec.to_json()}}.dump());
    if (!spec.idempotency_key.empty()) by_key_[spec.idempotency_key] = id;
    sessions_[id] = s;
    std::lock_guard<std::mutex> sl(s->mu);
    s->history.run_id = id;
    s->history.benchmark = spec.objective;
    s->history.method = spec.method;
    s->history.seed = spec.seed;
    s->history.horizon = spec.horizon;
    s->history.config = spec.config;
    start_compute(s);
    json j = s->snapshot();
    j["created"] = true;
    return j;
}

json SessionManager::next(const std::string& id) {
    auto s = find(id);
    std::lock_guard<std::mutex> lock(s->mu);
    return s->snapshot();
}

namespace {

std::string request_id_of(const json& body) {
    if (!body.contains("request_id")) return "";
    if (!body.at("request_id").is_string()) throw ServiceError(400, "invalid body", {"request_id: expected a string"});
    return body.at("request_id").get<std::string>();
}

}  // namespace

json SessionManager::submit_label(const std::string& id, const json& body) {
    auto s = find(id);
    if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
    const std::string rid = request_id_of(body);
    std::lock_guard<std::mutex> lock(s->mu);
    if (!rid.empty() && s->request_ids.count(rid)) return s->snapshot();
    if (!body.contains("label") || !body.at("label").is_number_integer())
        throw ServiceError(400, "invalid label", {"label: expected 0 or 1"});
    const int label = body.at("label").get<int>();
    if (label != 0 && label != 1) throw ServiceError(400, "invalid label", {"label: expected 0 or 1"});
    if (s->phase != "awaiting_label")
        throw ServiceError(409, "session is " + s->phase + ", not awaiting_label");
    json ev{{"event", "label"}, {"label", label}};
    if (!rid.empty()) ev["request_id"] = rid;
    durable_append(s->log_path, ev.dump());
    s->engine->submit_label(label);
    if (!rid.empty()) s->request_ids.insert(rid);
    s->phase = "computing";
    s->pending = nullptr;
    start_compute(s);
    return s->snapshot();
}

json SessionManager::submit_observation(const std::string& id, const json& body) {
    auto s = find(id);
    if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
    const std::string rid = request_id_of(body);
    std::lock_guard<std::mutex> lock(s->mu);
    if (!rid.empty() && s->request_ids.count(rid)) return s->snapshot();
    if (!body.contains("y") || !body.at("y").is_number())
        throw ServiceError(400, "invalid observation", {"y: expected a finite number"});
    const double y = body.at("y").get<double>();
    if (!std::isfinite(y)) throw ServiceError(400, "invalid observation", {"y: expected a finite number"});
    if (s->phase != "awaiting_observation")
        throw ServiceError(409, "session is " + s->phase + ", not awaiting_observation");
    json ev{{"event", "observation"}, {"y", y}};
    if (!rid.empty()) ev["request_id"] = rid;
    durable_append(s->log_path, ev.dump());
    s->engine->submit_observation(y);
    if (!rid.empty()) s->request_ids.insert(rid);
    s->phase = "computing";
    s->pending = nullptr;
    start_compute(s);
    return s->snapshot();
}

json SessionManager::state(const std::string& id) {
    auto s = find(id);
    std::lock_guard<std::mutex> lock(s->mu);
    json j = s->snapshot();
    const RunRecord& h = s->history;
    j["spec"] = s->spec.to_json();
    j["t"] = h.steps.empty() ? 0 : h.steps.back().t;
    j["num_observations"] = static_cast<int>(h.init_values.size()) +
                            static_cast<int>(std::count_if(h.steps.begin(), h.steps.end(),
                                                           [](const StepRecord& st) { return st.evaluated; }));
    j["num_labels"] = static_cast<int>(h.init_labels.size()) +
                      static_cast<int>(std::count_if(h.steps.begin(), h.steps.end(),
                                                     [](const StepRecord& st) { return st.label.has_value(); }));
    j["header"] = header_to_json(h);
    json steps = json::array();
    for (const auto& st : h.steps) steps.push_back(step_to_json(st));
    j["history"] = steps;
    const MetricSeries m = compute_metrics(h);
    json metrics{{"t", m.t}, {"Qg", m.queries}};
    std::vector<double> lambdas;
    for (const auto& st : h.steps) lambdas.push_back(st.lambda);
    metrics["lambda"] = lambdas;
    if (m.has_optimum) {
        metrics["SR"] = m.sr;
        metrics["R"] = m.regret;
    }
    j["metrics"] = metrics;
    return j;
}

void SessionManager::remove(const std::string& id) {
    auto s = find(id);
    {
        std::unique_lock<std::mutex> lock(s->mu);
        s->idle.wait(lock, [&] { return s->phase != "computing"; });
    }
    if (s->worker.joinable()) s->worker.join();
    std::lock_guard<std::mutex> lock(mu_);
    sessions_.erase(id);
    if (!s->spec.idempotency_key.empty()) by_key_.erase(s->spec.idempotency_key);
    fs::remove(s->log_path);
}

std::vector<std::string> SessionManager::list() {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

void SessionManager::wait_idle(const std::string& id) {
    auto s = find(id);
    std::unique_lock<std::mutex> lock(s->mu);
    s->idle.wait(lock, [&] { return s->phase != "computing"; });
}

struct HttpService::Impl {
    SessionManager& mgr;
    httplib::Server server;
    std::thread thread;

    explicit Impl(SessionManager& m) : mgr(m) {
        auto reply = [](httplib::Response& res, int status, const json& body) {
            res.status = status;
            res.set_content(body.dump(), "application/json");
        };
        auto guarded = [reply](auto fn) {
            return [fn, reply](const httplib::Request& req, httplib::Response& res) {
                try {
                    fn(req, res);
                } catch (const ServiceError& e) {
                    json b{{"error", e.what()}};
                    if (!e.fields.empty()) b["fields"] = e.fields;
                    reply(res, e.status, b);
                } catch (const json::exception& e) {
                    reply(res, 400, json{{"error", std::string("malformed JSON: ") + e.what()}});
                } catch (const std::exception& e) {
                    reply(res, 500, json{{"error", e.what()}});
                }
            };
        };
        auto body_of = [](const httplib::Request& req) { return req.body.empty() ? json::object() : json::parse(req.body); };

        server.Post("/sessions", guarded([this, reply, body_of](const httplib::Request& req, httplib::Response& res) {
            const json out = mgr.create(body_of(req));
            reply(res, out.value("created", false) ? 201 : 200, out);
        }));
        server.Get("/sessions", guarded([this, reply](const httplib::Request&, httplib::Response& res) {
            reply(res, 200, json{{"sessions", mgr.list()}});
        }));
        server.Get(R"(/sessions/([0-9a-f]+)/next)",
                   guarded([this, reply](const httplib::Request& req, httplib::Response& res) {
                       reply(res, 200, mgr.next(req.matches[1]));
                   }));
        server.Post(R"(/sessions/([0-9a-f]+)/label)",
                    guarded([this, reply, body_of](const httplib::Request& req, httplib::Response& res) {
                        reply(res, 200, mgr.submit_label(req.matches[1], body_of(req)));
                    }));
        server.Post(R"(/sessions/([0-9a-f]+)/observation)",
                    guarded([this, reply, body_of](const httplib::Request& req, httplib::Response& res) {
                        reply(res, 200, mgr.submit_observation(req.matches[1], body_of(req)));
                    }));
        server.Get(R"(/sessions/([0-9a-f]+))", guarded([this, reply](const httplib::Request& req, httplib::Response& res) {
                       reply(res, 200, mgr.state(req.matches[1]));
                   }));
        server.Delete(R"(/sessions/([0-9a-f]+))",
                      guarded([this, reply](const httplib::Request& req, httplib::Response& res) {
                          mgr.remove(req.matches[1]);
                          reply(res, 200, json{{"deleted", std::string(req.matches[1])}});
                      }));
    }
};

HttpService::HttpService(SessionManager& manager) : impl_(std::make_unique<Impl>(manager)) {}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0)
        bound = impl_->server.bind_to_any_port(host);
    else if (!impl_->server.bind_to_port(host, port))
        bound = -1;
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpService::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace cobol
