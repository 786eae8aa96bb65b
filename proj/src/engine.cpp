#include "cobol/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cobol {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Vec uniform_unit(int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec v(d);
    for (int j = 0; j < d; ++j) v[j] = u(rng);
    return v;
}

}  // namespace

std::string to_string(Method m) {
    switch (m) {
        case Method::Cobol: return "cobol";
        case Method::Cobohl: return "cobohl";
        case Method::VanillaLcb: return "vanilla_lcb";
        case Method::Random: return "random";
        case Method::ExpertSampling: return "expert_sampling";
    }
    return "?";
}

std::string to_string(Arm a) {
    switch (a) {
        case Arm::ExpertAugmented: return "expert_augmented";
        case Arm::Vanilla: return "vanilla";
        case Arm::Constrained: return "constrained";
        case Arm::Random: return "random";
        case Arm::ExpertSampling: return "expert_sampling";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    for (Method m : {Method::Cobol, Method::Cobohl, Method::VanillaLcb, Method::Random, Method::ExpertSampling})
        if (to_string(m) == s) return m;
    throw std::invalid_argument("unknown method: " + s);
}

Arm arm_from_string(const std::string& s) {
    for (Arm a : {Arm::ExpertAugmented, Arm::Vanilla, Arm::Constrained, Arm::Random, Arm::ExpertSampling})
        if (to_string(a) == s) return a;
    throw std::invalid_argument("unknown arm: " + s);
}

bool uses_labels(Method m) { return m == Method::Cobol || m == Method::Cobohl; }

std::vector<std::string> EngineConfig::problems() const {
    std::vector<std::string> out;
    auto need = [&](bool ok, const char* field, const char* what) {
        if (!ok) out.push_back(std::string(field) + ": " + what);
    };
    need(eta >= 1.0, "eta", "must be >= 1");
    need(lambda0 >= 0.0, "lambda0", "must be >= 0");
    need(zeta > 0.0, "zeta", "must be positive");
    need(g_thr > 0.0, "g_thr", "must be positive");
    need(g_thr_scale == "latent" || g_thr_scale == "probability", "g_thr_scale",
         "must be \"latent\" or \"probability\"");
    need(bound_g0 > 0.0, "bound_g0", "must be positive");
    need(alpha1 >= 0.0, "alpha1", "must be >= 0");
    need(radius_rule == "scalar" || radius_rule == "lemma" || radius_rule == "scaled_lemma", "radius_rule",
         "must be \"scalar\", \"lemma\" or \"scaled_lemma\"");
    need(delta > 0.0 && delta < 1.0, "delta", "must lie in (0, 1)");
    need(bound_f > 0.0, "bound_f", "must be positive");
    need(sigma >= 0.0, "sigma", "must be >= 0");
    need(noise >= 0.0, "noise", "must be >= 0");
    need(r > 0.0, "r", "must be positive");
    need(epsilon >= 0.0, "epsilon", "must be >= 0");
    need(fit_restarts >= 0, "fit_restarts", "must be >= 0");
    need(acq_starts >= 1, "acq_starts", "must be >= 1");
    need(acq_screen >= 0, "acq_screen", "must be >= 0");
    need(init_observations >= 0, "init_observations", "must be >= 0");
    need(init_labels >= 0, "init_labels", "must be >= 0");
    need(!window || *window > 0, "window", "must be positive");
    need(max_doublings >= 0, "max_doublings", "must be >= 0");
    need(lengthscale0 > 0.0, "lengthscale0", "must be positive");
    return out;
}

void EngineConfig::validate() const {
    const auto p = problems();
    if (p.empty()) return;
    std::ostringstream os;
    os << "invalid config";
    for (const auto& s : p) os << "; " << s;
    throw std::invalid_argument(os.str());
}

RadiusRule EngineConfig::radius(int horizon) const {
    RadiusRule rule;
    rule.kind = radius_rule == "lemma"          ? RadiusRule::Kind::Lemma
                : radius_rule == "scaled_lemma" ? RadiusRule::Kind::ScaledLemma
                                                : RadiusRule::Kind::Scalar;
    rule.alpha1 = alpha1;
    rule.reference_bound = bound_g0;
    rule.epsilon = epsilon > 0.0 ? epsilon : 1.0 / std::max(1, horizon);
    rule.delta = delta;
    rule.log_cover_proxy = log_cover_proxy;
    return rule;
}

bool operator==(const EngineConfig& a, const EngineConfig& b) {
    return a.eta == b.eta && a.lambda0 == b.lambda0 && a.zeta == b.zeta && a.g_thr == b.g_thr && a.g_thr_scale == b.g_thr_scale &&
           a.bound_g0 == b.bound_g0 && a.alpha1 == b.alpha1 && a.radius_rule == b.radius_rule &&
           a.log_cover_proxy == b.log_cover_proxy && a.delta == b.delta && a.bound_f == b.bound_f &&
           a.sigma == b.sigma && a.noise == b.noise && a.r == b.r && a.epsilon == b.epsilon &&
           a.fit_restarts == b.fit_restarts && a.acq_starts == b.acq_starts && a.acq_screen == b.acq_screen &&
           a.init_observations == b.init_observations && a.init_labels == b.init_labels && a.window == b.window &&
           a.max_doublings == b.max_doublings && a.lengthscale0 == b.lengthscale0;
}

bool operator==(const RunRecord& a, const RunRecord& b) {
    return a.schema == b.schema && a.run_id == b.run_id && a.method == b.method && a.benchmark == b.benchmark &&
           a.accuracy == b.accuracy && a.seed == b.seed && a.horizon == b.horizon && a.config == b.config &&
           a.init_points == b.init_points && a.init_values == b.init_values &&
           a.init_label_points == b.init_label_points && a.init_labels == b.init_labels && a.steps == b.steps &&
           a.error == b.error;
}

bool RunRecord::same_trace(const RunRecord& other) const {
    RunRecord a = *this, b = other;
    for (auto& s : a.steps) s.overhead_ms = 0.0;
    for (auto& s : b.steps) s.overhead_ms = 0.0;
    a.run_id = b.run_id;
    return a == b;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Engine::Engine(Method method, DomainBox box, EngineConfig config, int horizon, std::uint64_t seed,
               std::function<double(const Vec&)> reject_prob)
    : method_(method),
      box_(std::move(box)),
      unit_(DomainBox::unit(box_.dim())),
      cfg_(std::move(config)),
      horizon_(horizon),
      seed_(seed),
      reject_prob_(std::move(reject_prob)),
      method_rng_(derive_seed(seed, streams::method)),
      lambda_(0.0),
      bound_g_(0.0) {
    cfg_.validate();
    if (horizon < 0) throw std::invalid_argument("Engine: negative horizon");
    if (method == Method::ExpertSampling && !reject_prob_)
        throw std::invalid_argument("Engine: expert_sampling needs a reject-probability function");
    const int d = box_.dim();
    lambda_ = cfg_.lambda0;
    bound_g_ = cfg_.bound_g0;
    kernel_ = KernelConfig::isotropic(d, cfg_.lengthscale0);
    obs_.regularizer = cfg_.r;
    obs_.noise_sigma = cfg_.sigma;
    labels_.window = cfg_.window;
    gamma_candidates_ = sobol_points(d, 256);

    std::mt19937_64 init_rng(derive_seed(seed, streams::init));
    for (int i = 0; i < cfg_.init_observations; ++i) init_obs_u_.push_back(uniform_unit(d, init_rng));
    // Drawn for every method so the observation points agree across methods.
    for (int i = 0; i < cfg_.init_labels; ++i) init_label_u_.push_back(uniform_unit(d, init_rng));
    if (!uses_labels(method)) init_label_u_.clear();

    record_.method = to_string(method);
    record_.seed = seed;
    record_.horizon = horizon;
    record_.config = cfg_;
}

AcquisitionOptions Engine::acq_options() const {
    AcquisitionOptions o;
    o.starts = cfg_.acq_starts;
    o.screen = cfg_.acq_screen;
    o.seed = derive_seed(seed_, streams::acquisition) + static_cast<std::uint64_t>(t_);
    return o;
}

const GPosterior& Engine::posterior() {
    if (post_ && post_size_ == obs_.size()) return *post_;
    ObjectiveDataset std_ds = obs_;
    const std::size_t n = obs_.size();
    if (n > 0) {
        double mean = 0.0;
        for (double v : obs_.values) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : obs_.values) var += (v - mean) * (v - mean);
        const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
        const double scale = sd > 1e-12 ? sd : 1.0;
        for (double& v : std_ds.values) v = (v - mean) / scale;
    }
    if (n >= 2) {
        const HyperFit fit =
            fit_kernel_hyperparams(std_ds, kernel_, cfg_.fit_restarts, derive_seed(seed_, streams::fit) + n);
        kernel_ = fit.config;
    }
    const int m = static_cast<int>(std::min<std::size_t>(n, 256));
    const double gamma = info_gain_estimate(kernel_, cfg_.r, gamma_candidates_, m);
    const double beta = beta_f(cfg_.bound_f, cfg_.sigma, gamma, cfg_.delta);
    post_.emplace(kernel_, std_ds, beta, cfg_.bound_f);
    post_size_ = n;
    return *post_;
}

KernelConfig Engine::belief_kernel() {
    KernelConfig k = posterior().kernel();
    k.output_scale = 1.0;
    return k;
}

BeliefInterval Engine::current_interval(const Vec& u) {
    const int t = std::max(1, t_);
    const BeliefModel model(labels_.windowed(t), belief_kernel());
    const RadiusRule rule = cfg_.radius(horizon_);
    BeliefState bs{&model, bound_g_, rule(bound_g_, static_cast<int>(model.size()), t), model.solve_mle(bound_g_)};
    return bs.interval(u);
}

void Engine::request_label(const Vec& u, const BeliefInterval* iv) {
    pending_ = Request{};
    pending_.kind = Request::Kind::Label;
    pending_.x = box_.from_unit(u);
    pending_.t = stage_ == Stage::InitLabel ? 0 : t_;
    if (iv) {
        pending_.p_lower = iv->prob_lower;
        pending_.p_upper = iv->prob_upper;
    }
}

void Engine::request_observation(const Vec& u) {
    pending_ = Request{};
    pending_.kind = Request::Kind::Observation;
    pending_.x = box_.from_unit(u);
    pending_.t = stage_ == Stage::InitObservation ? 0 : t_;
}

void Engine::submit_label(int label) {
    if (needs_compute_ || pending_.kind != Request::Kind::Label)
        throw std::logic_error("submit_label: no label is pending");
    if (label != 0 && label != 1) throw std::invalid_argument("submit_label: label must be 0 or 1");
    const auto t0 = Clock::now();
    if (stage_ == Stage::InitLabel) {
        const Vec& u = init_label_u_[static_cast<std::size_t>(init_index_)];
        labels_.add(u, label, 0);
        record_.init_label_points.push_back(box_.from_unit(u));
        record_.init_labels.push_back(label);
        ++init_index_;
    } else {
        current_.label = label;
        labels_.add(current_u_, label, t_);
        if (method_ == Method::Cobol && label == 0) {
            stage_ = Stage::StepObservation;
            request_observation(current_u_);
            step_ms_ += ms_since(t0);
            return;
        }
        stage_ = Stage::StepOver;
    }
    step_ms_ += ms_since(t0);
    needs_compute_ = true;
}

void Engine::submit_observation(double y) {
    if (needs_compute_ || pending_.kind != Request::Kind::Observation)
        throw std::logic_error("submit_observation: no observation is pending");
    if (!std::isfinite(y)) throw std::invalid_argument("submit_observation: y must be finite");
    if (stage_ == Stage::InitObservation) {
        const Vec& u = init_obs_u_[static_cast<std::size_t>(init_index_)];
        obs_.add(u, y);
        record_.init_points.push_back(box_.from_unit(u));
        record_.init_values.push_back(y);
        ++init_index_;
    } else {
        current_.evaluated = true;
        current_.y = y;
        obs_.add(current_u_, y);
        stage_ = Stage::StepOver;
    }
    needs_compute_ = true;
}

void Engine::run_doubling(int t) {
    if (labels_.empty() || doublings_ >= cfg_.max_doublings) return;
    const BeliefModel model(labels_.windowed(t), belief_kernel());
    const DoublingResult res =
        maybe_double_norm_bound(model, bound_g_, cfg_.radius(horizon_), t, cfg_.max_doublings - doublings_);
    bound_g_ = res.bound;
    doublings_ += res.doublings;
}

void Engine::finish_step() {
    const auto t0 = Clock::now();
    if (method_ == Method::Cobol && current_.z_star) lambda_ = std::max(0.0, lambda_ + cfg_.zeta * *current_.z_star);
    if (uses_labels(method_)) run_doubling(t_);
    current_.overhead_ms = step_ms_ + ms_since(t0);
    record_.steps.push_back(current_);
    step_ms_ = 0.0;
    ++t_;
}

void Engine::compute_step() {
    const auto t0 = Clock::now();
    current_ = StepRecord{};
    current_.t = t_;
    current_.lambda = lambda_;
    current_.bound_g = bound_g_;
    const int d = box_.dim();

    switch (method_) {
        case Method::Random:
            current_.arm = Arm::Random;
            current_u_ = uniform_unit(d, method_rng_);
            break;
        case Method::ExpertSampling:
            current_.arm = Arm::ExpertSampling;
            current_u_ = unit_.clamp(box_.to_unit(rejection_sample(box_, reject_prob_, method_rng_)));
            break;
        case Method::VanillaLcb:
            current_.arm = Arm::Vanilla;
            current_u_ = vanilla_lcb_candidate(posterior(), unit_, acq_options());
            break;
        case Method::Cobol:
        case Method::Cobohl: {
            const AcquisitionOptions opts = acq_options();
            const GPosterior& post = posterior();
            const Vec x_u = vanilla_lcb_candidate(post, unit_, opts);
            const BeliefModel model(labels_.windowed(t_), belief_kernel());
            const RadiusRule rule = cfg_.radius(horizon_);
            const BeliefState bs{&model, bound_g_, rule(bound_g_, static_cast<int>(model.size()), t_),
                                 model.solve_mle(bound_g_)};
            bool ask = false;
            BeliefInterval iv;
            if (method_ == Method::Cobol) {
                const ExpertCandidate ec = expert_augmented_candidate(post, bs, lambda_, unit_, x_u, opts);
                const NoHarmResult nh = no_harm_gate(ec.x, x_u, post, cfg_.eta, unit_, opts);
                current_.z_star = ec.z_star;
                current_.fallback = ec.fallback;
                current_.no_harm = nh.pass;
                if (nh.pass) {
                    current_.arm = Arm::ExpertAugmented;
                    current_u_ = ec.x;
                    iv = bs.interval(current_u_);
                    current_.p_lower = iv.prob_lower;
                    current_.p_upper = iv.prob_upper;
                    ask = handover_gate(iv, cfg_.g_thr, cfg_.g_thr_scale == "probability");
                } else {
                    current_.arm = Arm::Vanilla;
                    current_u_ = x_u;
                }
            } else {
                const ConstrainedCandidate cc = cobohl_candidate(post, bs, unit_, x_u, opts);
                current_.arm = Arm::Constrained;
                current_.z_star = cc.z;
                current_.fallback = !cc.feasible;
                current_u_ = cc.x;
                iv = bs.interval(current_u_);
                current_.p_lower = iv.prob_lower;
                current_.p_upper = iv.prob_upper;
                ask = handover_gate(iv, cfg_.g_thr, cfg_.g_thr_scale == "probability");
            }
            current_.handover = ask;
            current_.queried = ask;
            current_.x = box_.from_unit(current_u_);
            if (ask) {
                stage_ = Stage::StepLabel;
                request_label(current_u_, &iv);
                step_ms_ += ms_since(t0);
                return;
            }
            break;
        }
    }
    current_.x = box_.from_unit(current_u_);
    stage_ = Stage::StepObservation;
    request_observation(current_u_);
    step_ms_ += ms_since(t0);
}

void Engine::advance() {
    if (!needs_compute_) return;
    if (stage_ == Stage::StepOver) {
        finish_step();
        stage_ = Stage::Between;
    }
    for (;;) {
        if (stage_ == Stage::InitObservation) {
            if (init_index_ < static_cast<int>(init_obs_u_.size())) {
                request_observation(init_obs_u_[static_cast<std::size_t>(init_index_)]);
                break;
            }
            stage_ = Stage::InitLabel;
            init_index_ = 0;
            continue;
        }
        if (stage_ == Stage::InitLabel) {
            if (init_index_ < static_cast<int>(init_label_u_.size())) {
                const Vec& u = init_label_u_[static_cast<std::size_t>(init_index_)];
                const BeliefInterval iv = current_interval(u);
                request_label(u, &iv);
                break;
            }
            // pre-training pass over the initial labels
            if (uses_labels(method_)) run_doubling(1);
            t_ = 1;
            stage_ = Stage::Between;
            continue;
        }
        if (t_ > horizon_) {
            stage_ = Stage::Done;
            pending_ = Request{};
            pending_.t = horizon_;
            break;
        }
        compute_step();
        break;
    }
    needs_compute_ = false;
}

BenchmarkObjective::BenchmarkObjective(std::function<double(const Vec&)> f, double noise, std::uint64_t seed)
    : f_(std::move(f)), noise_(noise), rng_(seed) {
    if (noise < 0.0) throw std::invalid_argument("BenchmarkObjective: negative noise");
}

double BenchmarkObjective::operator()(const Vec& x) {
    const double v = f_(x);
    if (noise_ == 0.0) return v;
    std::normal_distribution<double> n(0.0, noise_);
    return v + n(rng_);
}

RunRecord drive(Engine& engine, const std::function<double(const Vec&)>& objective, ExpertOracle* expert) {
    try {
        for (;;) {
            engine.advance();
            const Request& req = engine.pending();
            if (req.kind == Request::Kind::Done) break;
            if (req.kind == Request::Kind::Label) {
                if (!expert) throw std::logic_error("drive: run asked for a label but has no expert");
                LabelContext ctx{req.x, req.t, req.p_lower, req.p_upper};
                engine.submit_label(expert->label(req.x, ctx));
            } else {
                engine.submit_observation(objective(req.x));
            }
        }
    } catch (const std::exception& e) {
        engine.record().error = e.what();
    }
    return engine.record();
}

namespace {

RunRecord run_with(Method m, const std::function<double(const Vec&)>& objective, ExpertOracle* expert,
                   const DomainBox& box, const EngineConfig& config, int horizon, std::uint64_t seed) {
    Engine engine(m, box, config, horizon, seed);
    BenchmarkObjective noisy(objective, config.noise, derive_seed(seed, streams::noise));
    return drive(engine, [&](const Vec& x) { return noisy(x); }, expert);
}

}  // namespace

RunRecord cobol_run(const std::function<double(const Vec&)>& objective, ExpertOracle& expert, const DomainBox& box,
                    const EngineConfig& config, int horizon, std::uint64_t seed) {
    return run_with(Method::Cobol, objective, &expert, box, config, horizon, seed);
}

RunRecord cobohl_run(const std::function<double(const Vec&)>& objective, ExpertOracle& expert, const DomainBox& box,
                     const EngineConfig& config, int horizon, std::uint64_t seed) {
    return run_with(Method::Cobohl, objective, &expert, box, config, horizon, seed);
}

RunRecord vanilla_run(const std::function<double(const Vec&)>& objective, const DomainBox& box,
                      const EngineConfig& config, int horizon, std::uint64_t seed) {
    return run_with(Method::VanillaLcb, objective, nullptr, box, config, horizon, seed);
}

}  // namespace cobol
