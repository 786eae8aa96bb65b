#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cobol/engine.hpp"
#include "cobol/records.hpp"

namespace cobol {

struct ServiceError : std::runtime_error {
    int status;
    std::vector<std::string> fields;
    ServiceError(int code, const std::string& msg, std::vector<std::string> f = {})
        : std::runtime_error(msg), status(code), fields(std::move(f)) {}
};

/// What a session runs. objective is a benchmark name or "external".
struct SessionSpec {
    EngineConfig config;
    std::string method = "cobol";
    std::string objective = "external";
    DomainBox box;
    int horizon = 20;
    std::uint64_t seed = 0;
    double accuracy = 0.0;  // bookkeeping only
    std::string idempotency_key;

    static SessionSpec from_json(const json& j);  // throws ServiceError(400) with field list
    json to_json() const;
};

/// Live sessions backed by an append-only event log per session
/// (<data_dir>/<id>.jsonl). Solves run on a worker thread per session; while
/// one runs the phase reads "computing".
class SessionManager {
public:
    explicit SessionManager(std::string data_dir);
    ~SessionManager();
    SessionManager(const SessionManager&) = delete;
    SessionManager& operator=(const SessionManager&) = delete;

    /// Returns {"session_id", "created"} plus the next-action snapshot.
    json create(const json& body);
    json next(const std::string& id);
    json submit_label(const std::string& id, const json& body);
    json submit_observation(const std::string& id, const json& body);
    json state(const std::string& id);
    void remove(const std::string& id);
    std::vector<std::string> list();

    /// Blocks until the session is not computing.
    void wait_idle(const std::string& id);

    const std::string& data_dir() const { return dir_; }

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id);
    void load(const std::string& path);
    void start_compute(const std::shared_ptr<Session>& s);

    std::string dir_;
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, std::string> by_key_;
};

/// HTTP front end:
///   POST /sessions, GET /sessions, GET /sessions/{id}, DELETE /sessions/{id},
///   GET /sessions/{id}/next, POST /sessions/{id}/label, POST /sessions/{id}/observation
class HttpService {
public:
    explicit HttpService(SessionManager& manager);
    ~HttpService();

    /// Binds and serves on a background thread; port 0 picks a free port.
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace cobol
