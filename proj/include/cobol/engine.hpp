#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cobol/acquisition.hpp"
#include "cobol/belief.hpp"
#include "cobol/domain.hpp"
#include "cobol/experts.hpp"
#include "cobol/gp.hpp"

namespace cobol {

enum class Method { Cobol, Cobohl, VanillaLcb, Random, ExpertSampling };
enum class Arm { ExpertAugmented, Vanilla, Constrained, Random, ExpertSampling };

std::string to_string(Method m);
std::string to_string(Arm a);
Method method_from_string(const std::string& s);
Arm arm_from_string(const std::string& s);
bool uses_labels(Method m);

/// Hyperparameters of a run. Defaults follow the desk-scale protocol.
struct EngineConfig {
    double eta = 3.0;
    double lambda0 = 1.0;
    double zeta = 0.02;
    double g_thr = 0.1;
    std::string g_thr_scale = "latent";  // or "probability": width of [S(lower), S(upper)]
    double bound_g0 = 1.0;         // initial B_g guess
    double alpha1 = 0.01;          // radius at B_g = bound_g0 (scalar rule)
    std::string radius_rule = "scalar";  // "lemma", "scaled_lemma"
    double log_cover_proxy = 0.0;  // lemma rule only
    double delta = 0.01;
    double bound_f = 1.0;          // standardized units
    double sigma = 1e-4;           // noise level inside beta_f
    double noise = 1e-4;           // std of the benchmark observation noise, original units
    double r = 1e-4;
    double epsilon = 0.0;          // 0 means 1/T
    int fit_restarts = 4;
    int acq_starts = 8;
    int acq_screen = 256;
    int init_observations = 3;
    int init_labels = 10;
    std::optional<int> window;
    int max_doublings = 10;
    double lengthscale0 = 0.5;

    /// Field-level complaints; empty when valid.
    std::vector<std::string> problems() const;
    void validate() const;
    RadiusRule radius(int horizon) const;
};

struct StepRecord {
    int t = 0;
    Arm arm = Arm::Vanilla;
    Vec x;                        // original units
    bool queried = false;
    std::optional<int> label;
    bool evaluated = false;
    std::optional<double> y;
    std::optional<double> z_star;
    bool no_harm = false;
    bool handover = false;
    double lambda = 0.0;          // weight used by this step's acquisition
    double bound_g = 0.0;
    std::optional<double> p_lower;
    std::optional<double> p_upper;
    bool fallback = false;
    double overhead_ms = 0.0;

    bool operator==(const StepRecord&) const = default;
};

struct RunRecord {
    int schema = 1;
    std::string run_id;
    std::string method;
    std::string benchmark;
    double accuracy = 0.0;
    std::uint64_t seed = 0;
    int horizon = 0;
    EngineConfig config;
    std::vector<Vec> init_points;
    std::vector<double> init_values;
    std::vector<Vec> init_label_points;
    std::vector<int> init_labels;
    std::vector<StepRecord> steps;
    std::string error;            // set when the run aborted

    /// Equality ignoring wall-clock overheads.
    bool same_trace(const RunRecord& other) const;
};

bool operator==(const EngineConfig& a, const EngineConfig& b);
bool operator==(const RunRecord& a, const RunRecord& b);

/// Independent 64-bit stream seed (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

namespace streams {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t noise = 2;
inline constexpr std::uint64_t expert = 3;
inline constexpr std::uint64_t method = 4;
inline constexpr std::uint64_t fit = 5;
inline constexpr std::uint64_t acquisition = 6;
}  // namespace streams

/// What the run is waiting for.
struct Request {
    enum class Kind { Label, Observation, Done };
    Kind kind = Kind::Done;
    Vec x;              // original units
    int t = 0;          // 0 during the initial design
    double p_lower = 0.5;
    double p_upper = 0.5;
};

/// One optimization run as a resumable state machine. Each call to advance()
/// computes until the run needs a label, an observation, or is done; answers
/// go in through submit_label / submit_observation. The expert oracle and the
/// objective live outside, so an in-process loop and a remote client drive
/// the same code.
class Engine {
public:
    Engine(Method method, DomainBox box, EngineConfig config, int horizon, std::uint64_t seed,
           std::function<double(const Vec&)> reject_prob = {});

    /// True when an answer was accepted and the next request is not yet known.
    bool needs_compute() const { return needs_compute_; }
    void advance();
    const Request& pending() const { return pending_; }
    bool finished() const { return pending_.kind == Request::Kind::Done && !needs_compute_; }

    void submit_label(int label);
    void submit_observation(double y);

    RunRecord& record() { return record_; }
    const RunRecord& record() const { return record_; }
    int t() const { return t_; }
    int num_observations() const { return static_cast<int>(obs_.size()); }
    int num_labels() const { return static_cast<int>(labels_.size()); }
    double lambda() const { return lambda_; }
    double bound_g() const { return bound_g_; }
    const DomainBox& box() const { return box_; }
    Method method() const { return method_; }

private:
    enum class Stage { InitObservation, InitLabel, Between, StepLabel, StepObservation, StepOver, Done };

    void compute_step();
    void finish_step();
    const GPosterior& posterior();
    KernelConfig belief_kernel();
    AcquisitionOptions acq_options() const;
    BeliefInterval current_interval(const Vec& u);
    void request_label(const Vec& u, const BeliefInterval* iv);
    void request_observation(const Vec& u);
    void run_doubling(int t);

    Method method_;
    DomainBox box_;
    DomainBox unit_;
    EngineConfig cfg_;
    int horizon_;
    std::uint64_t seed_;
    std::function<double(const Vec&)> reject_prob_;
    std::mt19937_64 method_rng_;

    RunRecord record_;
    Stage stage_ = Stage::InitObservation;
    Request pending_;
    bool needs_compute_ = true;
    int init_index_ = 0;
    int t_ = 0;

    std::vector<Vec> init_obs_u_;
    std::vector<Vec> init_label_u_;
    ObjectiveDataset obs_;   // unit cube, raw y
    BeliefDataset labels_;   // unit cube
    KernelConfig kernel_;
    std::optional<GPosterior> post_;
    std::size_t post_size_ = static_cast<std::size_t>(-1);
    Mat gamma_candidates_;

    double lambda_;
    double bound_g_;
    int doublings_ = 0;
    StepRecord current_;
    Vec current_u_;
    double step_ms_ = 0.0;
};

/// Objective evaluation for benchmark-backed runs: f plus Gaussian noise from
/// the run's noise stream.
class BenchmarkObjective {
public:
    BenchmarkObjective(std::function<double(const Vec&)> f, double noise, std::uint64_t seed);
    double operator()(const Vec& x);

private:
    std::function<double(const Vec&)> f_;
    double noise_;
    std::mt19937_64 rng_;
};

/// Drives an engine to completion with in-process oracles. The expert may be
/// null for methods that never ask for labels.
RunRecord drive(Engine& engine, const std::function<double(const Vec&)>& objective, ExpertOracle* expert);

RunRecord cobol_run(const std::function<double(const Vec&)>& objective, ExpertOracle& expert, const DomainBox& box,
                    const EngineConfig& config, int horizon, std::uint64_t seed);
RunRecord cobohl_run(const std::function<double(const Vec&)>& objective, ExpertOracle& expert, const DomainBox& box,
                     const EngineConfig& config, int horizon, std::uint64_t seed);
RunRecord vanilla_run(const std::function<double(const Vec&)>& objective, const DomainBox& box,
                      const EngineConfig& config, int horizon, std::uint64_t seed);

}  // namespace cobol
